#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cxrseg/rng.hpp"
#include "cxrseg/tensor.hpp"

namespace cxrseg {

struct MixupConfig {
  double delta = 0.2;  // shape of the symmetric Beta(delta, delta)
  bool enabled = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Beta(a, b) draw by Johnk's rejection method, evaluated in log space so
/// that tiny shapes (where U^(1/a) underflows) stay exact.
double sample_beta(double a, double b, Rng& rng);
inline double sample_beta(double delta, Rng& rng) { return sample_beta(delta, delta, rng); }

struct SamplePair {
  std::size_t first;
  std::size_t second;
};

/// Random permutation of `indices`, each element paired with its cyclic
/// successor. Every index appears exactly once as `first`.
std::vector<SamplePair> pair_epoch(std::span<const std::size_t> indices, Rng& rng);

struct MixPlan {
  std::size_t first;
  std::size_t second;
  double lambda;  // weight of `first`
};

/// Pairing and lambda draws for one epoch over samples 0..n-1. Deterministic
/// in (config.seed, epoch). With mixup disabled every entry is {i, i, 1}.
std::vector<MixPlan> plan_epoch(std::size_t n, const MixupConfig& config, std::uint64_t epoch);

struct MixedSample {
  Tensor image;
  Tensor soft_mask;
  double lambda = 1.0;
};

/// lambda * a + (1 - lambda) * b for both image and mask.
MixedSample mixup(const Tensor& image_a, const Tensor& mask_a, const Tensor& image_b,
                  const Tensor& mask_b, double lambda);

}  // namespace cxrseg
