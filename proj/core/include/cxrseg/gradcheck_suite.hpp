#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxrseg/gradcheck.hpp"

namespace cxrseg {

struct SuiteEntry {
  std::string op;
  GradcheckReport report;
  double seconds = 0.0;
};

/// Finite-difference checks of every differentiable building block: conv2d,
/// max pooling, batch norm, the activations, softmax, the structural ops, a
/// ConvLSTM step, the BiConvLSTM fuser, the attention gate and the whole
/// model (depth 2, base 2, one 16x16 image) through the focal Tversky loss.
/// A non-empty `only` restricts the run to the op of that name.
std::vector<SuiteEntry> run_gradcheck_suite(std::uint64_t seed = 0,
                                            const GradcheckOptions& options = {},
                                            const std::string& only = "");

}  // namespace cxrseg
