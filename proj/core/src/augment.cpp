#include "cxrseg/augment.hpp"

#include <cmath>
#include <numeric>

#include "cxrseg/errors.hpp"

namespace cxrseg {

void MixupConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("mixup delta must be in (0, inf)");
}

double sample_beta(double a, double b, Rng& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw UsageError("beta shape parameters must be > 0");
  for (;;) {
    const double lx = std::log(rng.uniform_open()) / a;
    const double ly = std::log(rng.uniform_open()) / b;
    const double m = std::max(lx, ly);
    const double ex = std::exp(lx - m), ey = std::exp(ly - m);
    const double s = ex + ey;
    // Accept when X + Y <= 1, i.e. m + log(s) <= 0.
    if (m + std::log(s) <= 0.0) return ex / s;
  }
}

std::vector<SamplePair> pair_epoch(std::span<const std::size_t> indices, Rng& rng) {
  if (indices.size() < 2) throw ConfigError("mixup pairing needs at least two samples");
  std::vector<std::size_t> perm(indices.begin(), indices.end());
  rng.shuffle(perm);
  std::vector<SamplePair> pairs;
  pairs.reserve(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k)
    pairs.push_back({perm[k], perm[(k + 1) % perm.size()]});
  return pairs;
}

std::vector<MixPlan> plan_epoch(std::size_t n, const MixupConfig& config, std::uint64_t epoch) {
  std::vector<MixPlan> plan;
  if (!config.enabled) {
    for (std::size_t i = 0; i < n; ++i) plan.push_back({i, i, 1.0});
    return plan;
  }
  config.validate();
  Rng rng(derive_seed(config.seed, epoch));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (const auto& p : pair_epoch(idx, rng))
    plan.push_back({p.first, p.second, sample_beta(config.delta, rng)});
  return plan;
}

MixedSample mixup(const Tensor& image_a, const Tensor& mask_a, const Tensor& image_b,
                  const Tensor& mask_b, double lambda) {
  if (image_a.shape() != image_b.shape() || mask_a.shape() != mask_b.shape())
    throw ShapeError("mixup operands differ in shape: " + shape_str(image_a.shape()) + "/" +
                     shape_str(mask_a.shape()) + " vs " + shape_str(image_b.shape()) + "/" +
                     shape_str(mask_b.shape()));
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("mixup lambda must lie in [0, 1]");
  auto blend = [lambda](const Tensor& a, const Tensor& b) {
    Tensor out(a.shape());
    auto o = out.values();
    const auto va = a.values(), vb = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = lambda * va[i] + (1.0 - lambda) * vb[i];
    return out;
  };
  return {blend(image_a, image_b), blend(mask_a, mask_b), lambda};
}

}  // namespace cxrseg
