#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cxrseg/tensor.hpp"

namespace cxrseg {

enum ClassLabel : std::uint8_t { kBackground = 0, kLung = 1, kHeart = 2 };
inline constexpr std::size_t kNumClasses = 3;
const char* class_name(std::size_t cls);

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  /// 2TP / (2TP + FP + FN); 1 when the class is absent from both maps.
  double dsc() const;
  /// TP / (TP + FP + FN); 1 when the class is absent from both maps.
  double iou() const;
};

struct ClassMetrics {
  std::size_t cls = 0;
  ConfusionCounts counts;
  double dsc = 0.0;
  double iou = 0.0;
};

struct CrispMetrics {
  std::vector<ClassMetrics> per_class;  // one entry per class in 0..num_classes-1
  double mean_dsc = 0.0;                // over foreground classes only
  double mean_iou = 0.0;
};

/// Set-overlap metrics between two label maps of equal size. Labels must be
/// < num_classes. The headline means cover classes 1..num_classes-1.
CrispMetrics crisp_metrics(std::span<const std::uint8_t> predicted,
                           std::span<const std::uint8_t> truth,
                           std::size_t num_classes = kNumClasses);

/// Per-pixel argmax over the class axis of image `n` of a [N, C, H, W]
/// tensor; ties resolve to the lowest class index.
std::vector<std::uint8_t> argmax_labels(const Tensor& probabilities, std::size_t n);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

}  // namespace cxrseg
