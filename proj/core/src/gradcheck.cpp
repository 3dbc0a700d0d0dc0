#include "cxrseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cxrseg/rng.hpp"

namespace cxrseg {

double GradcheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

namespace {
double project(const Tensor& out, const std::vector<double>& w) {
  const auto v = out.values();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
  return s;
}
}  // namespace

GradcheckReport gradcheck(const GradcheckFn& fn, const std::vector<Tensor>& inputs,
                          const std::vector<std::string>& names, std::uint64_t seed,
                          const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;

  std::vector<bool> previous_flags;
  for (auto t : inputs) {
    previous_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tensor out = fn(inputs);
  Rng rng(derive_seed(seed, 0x6772616463686b));
  std::vector<double> weights(out.numel());
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
  if (out.has_grad_fn()) out.backward(weights);

  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  report.passed = true;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    GradcheckEntry entry;
    entry.name = k < names.size() ? names[k] : "input" + std::to_string(k);
    entry.numel = t.numel();
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + options.step;
      const double fp = project(fn(inputs), weights);
      v[i] = saved - options.step;
      const double fm = project(fn(inputs), weights);
      v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      double rel = std::abs(a - numeric) / denom;
      if (!std::isfinite(rel)) rel = INFINITY;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    if (!(entry.max_rel_error < options.tolerance)) report.passed = false;
    report.entries.push_back(std::move(entry));
  }

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    t.zero_grad();
    t.set_requires_grad(previous_flags[k]);
  }
  return report;
}

GradcheckReport gradcheck(const GradcheckFn& fn, const std::vector<Shape>& input_shapes,
                          std::uint64_t seed, const GradcheckOptions& options) {
  Rng rng(seed);
  std::vector<Tensor> inputs;
  for (const auto& s : input_shapes) {
    Tensor t(s);
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    inputs.push_back(std::move(t));
  }
  return gradcheck(fn, inputs, {}, seed, options);
}

}  // namespace cxrseg
