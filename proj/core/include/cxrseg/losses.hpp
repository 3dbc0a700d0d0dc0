#pragma once

#include <cstddef>
#include <vector>

#include "cxrseg/tensor.hpp"

namespace cxrseg {

/// Focal Tversky loss family parameters.
///
/// `alpha` weights sum((1 - p) g), the false-negative mass; `beta` weights
/// sum(p (1 - g)), the false-positive mass.
struct LossConfig {
  double alpha = 0.6;
  double beta = 0.4;
  double gamma_inv = 0.675;  // focal exponent 1/gamma, gamma in [1, 3]
  double epsilon = 1e-6;
  std::vector<std::size_t> class_set{0, 1, 2};

  void validate() const;
};

/// Soft Dice variants. `unscaled` is (sum pg + eps) / (sum (p + g) + eps),
/// which tops out near 1/2 for a perfect prediction; `two_factor` is
/// (sum pg + eps) / (0.5 sum (p + g) + eps), which reaches 1.
enum class DiceForm { unscaled, two_factor };

/// Per-class sums over every pixel of every image in the batch.
struct ClassSums {
  double pg = 0.0;  // sum p*g
  double p = 0.0;   // sum p
  double g = 0.0;   // sum g
};

/// p, g: [N, C, H, W] (any rank >= 2 with classes on axis 1). g may be soft.
ClassSums class_sums(const Tensor& p, const Tensor& g, std::size_t cls);

double soft_dice_per_class(const Tensor& p, const Tensor& g, std::size_t cls, double epsilon,
                           DiceForm form = DiceForm::unscaled);
double tversky_index(const Tensor& p, const Tensor& g, std::size_t cls, const LossConfig& config);

// Differentiable losses (gradient with respect to p only). Each returns a
// one-element tensor.

/// sum_c (1 - DSC_c) over config.class_set.
Tensor dice_loss(const Tensor& p, const Tensor& g, const LossConfig& config,
                 DiceForm form = DiceForm::unscaled);
/// sum_c (1 - TI_c).
Tensor tversky_loss(const Tensor& p, const Tensor& g, const LossConfig& config);
/// sum_c (1 - TI_c)^(1/gamma).
Tensor focal_tversky_loss(const Tensor& p, const Tensor& g, const LossConfig& config);

}  // namespace cxrseg
