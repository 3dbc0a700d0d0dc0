#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cxrseg/tensor.hpp"

namespace cxrseg {

struct GradcheckOptions {
  double step = 1e-5;       // central-difference step
  double tolerance = 1e-4;  // max allowed relative error
  // Denominator floor of the relative error, so gradients that are zero up to
  // round-off are compared absolutely instead of blowing up the ratio.
  double denominator_floor = 1e-3;
};

struct GradcheckEntry {
  std::string name;
  std::size_t numel = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;
  bool passed = false;

  double max_rel_error() const;
};

using GradcheckFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares reverse-mode gradients of `fn` against central finite
/// differences for every element of every tensor in `inputs`.
///
/// The output is reduced to a scalar by a fixed random projection drawn from
/// `seed`. Inputs are perturbed in place and restored afterwards, so tensors
/// captured by `fn` (e.g. model parameters) can be checked by passing the
/// same handles in `inputs`. Failures are reported, never thrown.
GradcheckReport gradcheck(const GradcheckFn& fn, const std::vector<Tensor>& inputs,
                          const std::vector<std::string>& names, std::uint64_t seed,
                          const GradcheckOptions& options = {});

/// Builds random inputs of the given shapes, uniform in [-1, 1), then checks.
GradcheckReport gradcheck(const GradcheckFn& fn, const std::vector<Shape>& input_shapes,
                          std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace cxrseg
