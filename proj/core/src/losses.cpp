#include "cxrseg/losses.hpp"

#include <cmath>

#include "cxrseg/errors.hpp"

namespace cxrseg {

void LossConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("loss.alpha and loss.beta must be > 0");
  if (!(gamma_inv >= 1.0 / 3.0 - 1e-12 && gamma_inv <= 1.0))
    throw ConfigError("loss.gamma_inv must lie in [1/3, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("loss.epsilon must be > 0");
  if (class_set.empty()) throw ConfigError("loss.class_set must not be empty");
}

namespace {

struct Layout {
  std::size_t outer, classes, inner;
};

Layout layout_of(const Tensor& p, const Tensor& g) {
  if (p.shape() != g.shape())
    throw ShapeError("prediction " + shape_str(p.shape()) + " and ground truth " +
                     shape_str(g.shape()) + " differ");
  if (p.rank() < 2) throw ShapeError("loss inputs need a class axis, got " + shape_str(p.shape()));
  const auto& s = p.shape();
  std::size_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return {s[0], s[1], inner};
}

void check_class(const Layout& l, std::size_t cls) {
  if (cls >= l.classes)
    throw ShapeError("class " + std::to_string(cls) + " out of range for " +
                     std::to_string(l.classes) + " classes");
}

ClassSums sums_for(const Tensor& p, const Tensor& g, const Layout& l, std::size_t cls) {
  ClassSums s;
  const auto pv = p.values(), gv = g.values();
  for (std::size_t n = 0; n < l.outer; ++n) {
    const std::size_t off = (n * l.classes + cls) * l.inner;
    for (std::size_t i = 0; i < l.inner; ++i) {
      s.pg += pv[off + i] * gv[off + i];
      s.p += pv[off + i];
      s.g += gv[off + i];
    }
  }
  return s;
}

// Overlap index I = (S_pg + eps) / (a S_pg + b S_p + c S_g + eps).
struct IndexForm {
  double a, b, c;
};

IndexForm dice_form(DiceForm f) {
  return f == DiceForm::unscaled ? IndexForm{0.0, 1.0, 1.0} : IndexForm{0.0, 0.5, 0.5};
}

IndexForm tversky_form(const LossConfig& cfg) {
  // S_pg + alpha (S_g - S_pg) + beta (S_p - S_pg)
  return {1.0 - cfg.alpha - cfg.beta, cfg.beta, cfg.alpha};
}

struct IndexValue {
  double value;
  double d_pg;  // dI / dS_pg
  double d_p;   // dI / dS_p
};

IndexValue overlap_index(const ClassSums& s, const IndexForm& f, double eps) {
  const double num = s.pg + eps;
  const double den = f.a * s.pg + f.b * s.p + f.c * s.g + eps;
  return {num / den, (den - num * f.a) / (den * den), -num * f.b / (den * den)};
}

// sum_c (1 - I_c)^exponent, differentiable in p.
Tensor overlap_loss(const Tensor& p, const Tensor& g, const LossConfig& cfg, const IndexForm& form,
                    double exponent, const char* name) {
  cfg.validate();
  const Layout l = layout_of(p, g);
  for (auto c : cfg.class_set) check_class(l, c);

  double total = 0.0;
  // dL/dS_pg and dL/dS_p for each class in class_set.
  std::vector<std::pair<double, double>> coeff;
  for (auto c : cfg.class_set) {
    const IndexValue iv = overlap_index(sums_for(p, g, l, c), form, cfg.epsilon);
    const double gap = 1.0 - iv.value;
    double dloss_di = 0.0;
    if (exponent == 1.0) {
      total += gap;
      dloss_di = -1.0;
    } else if (gap > 0.0) {
      total += std::pow(gap, exponent);
      dloss_di = -exponent * std::pow(gap, exponent - 1.0);
    }
    coeff.emplace_back(dloss_di * iv.d_pg, dloss_di * iv.d_p);
  }

  std::vector<std::size_t> classes = cfg.class_set;
  return Tensor::record(Tensor::scalar(total), name, {p, g},
                        [pt = Tensor(p), g, l, classes, coeff](std::span<const double>,
                                                  std::span<const double> gy) mutable {
                          if (!pt.requires_grad()) return;
                          auto gp = pt.grad_mut();
                          const auto gv = g.values();
                          for (std::size_t k = 0; k < classes.size(); ++k) {
                            const auto [c_pg, c_p] = coeff[k];
                            for (std::size_t n = 0; n < l.outer; ++n) {
                              const std::size_t off = (n * l.classes + classes[k]) * l.inner;
                              for (std::size_t i = 0; i < l.inner; ++i)
                                gp[off + i] += gy[0] * (c_pg * gv[off + i] + c_p);
                            }
                          }
                        });
}

}  // namespace

ClassSums class_sums(const Tensor& p, const Tensor& g, std::size_t cls) {
  const Layout l = layout_of(p, g);
  check_class(l, cls);
  return sums_for(p, g, l, cls);
}

double soft_dice_per_class(const Tensor& p, const Tensor& g, std::size_t cls, double epsilon,
                           DiceForm form) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  return overlap_index(class_sums(p, g, cls), dice_form(form), epsilon).value;
}

double tversky_index(const Tensor& p, const Tensor& g, std::size_t cls, const LossConfig& config) {
  config.validate();
  return overlap_index(class_sums(p, g, cls), tversky_form(config), config.epsilon).value;
}

Tensor dice_loss(const Tensor& p, const Tensor& g, const LossConfig& config, DiceForm form) {
  return overlap_loss(p, g, config, dice_form(form), 1.0, "dice_loss");
}

Tensor tversky_loss(const Tensor& p, const Tensor& g, const LossConfig& config) {
  return overlap_loss(p, g, config, tversky_form(config), 1.0, "tversky_loss");
}

Tensor focal_tversky_loss(const Tensor& p, const Tensor& g, const LossConfig& config) {
  return overlap_loss(p, g, config, tversky_form(config), config.gamma_inv, "focal_tversky_loss");
}

}  // namespace cxrseg
