#pragma once

#include <filesystem>
#include <string>

#include "cxrseg/rng.hpp"
#include "cxrseg/tensor.hpp"

namespace testsupport {

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(CXRSEG_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline cxrseg::Tensor random_tensor(const cxrseg::Shape& shape, cxrseg::Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  cxrseg::Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace testsupport
