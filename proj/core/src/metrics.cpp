#include "cxrseg/metrics.hpp"

#include <cmath>

#include "cxrseg/errors.hpp"

namespace cxrseg {

const char* class_name(std::size_t cls) {
  switch (cls) {
    case kBackground: return "background";
    case kLung: return "lung";
    case kHeart: return "heart";
    default: return "class";
  }
}

double ConfusionCounts::dsc() const {
  const auto den = 2 * tp + fp + fn;
  return den == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

double ConfusionCounts::iou() const {
  const auto den = tp + fp + fn;
  return den == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(den);
}

CrispMetrics crisp_metrics(std::span<const std::uint8_t> predicted,
                           std::span<const std::uint8_t> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size())
    throw ShapeError("label maps of different sizes: " + std::to_string(predicted.size()) +
                     " vs " + std::to_string(truth.size()));
  if (num_classes < 2) throw UsageError("crisp_metrics needs at least two classes");
  std::vector<std::uint64_t> pred_count(num_classes), true_count(num_classes),
      both(num_classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto a = predicted[i], b = truth[i];
    if (a >= num_classes || b >= num_classes)
      throw DataError("label value " + std::to_string(std::max(a, b)) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    ++pred_count[a];
    ++true_count[b];
    if (a == b) ++both[a];
  }
  CrispMetrics m;
  const auto total = static_cast<std::uint64_t>(predicted.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    ClassMetrics cm;
    cm.cls = c;
    cm.counts.tp = both[c];
    cm.counts.fp = pred_count[c] - both[c];
    cm.counts.fn = true_count[c] - both[c];
    cm.counts.tn = total - cm.counts.tp - cm.counts.fp - cm.counts.fn;
    cm.dsc = cm.counts.dsc();
    cm.iou = cm.counts.iou();
    if (c > 0) {
      m.mean_dsc += cm.dsc;
      m.mean_iou += cm.iou;
    }
    m.per_class.push_back(cm);
  }
  m.mean_dsc /= static_cast<double>(num_classes - 1);
  m.mean_iou /= static_cast<double>(num_classes - 1);
  return m;
}

std::vector<std::uint8_t> argmax_labels(const Tensor& probabilities, std::size_t n) {
  if (probabilities.rank() != 4)
    throw ShapeError("argmax_labels expects [N,C,H,W], got " + shape_str(probabilities.shape()));
  const auto& s = probabilities.shape();
  if (n >= s[0]) throw UsageError("argmax_labels: image index out of range");
  if (s[1] > 255) throw ShapeError("argmax_labels supports at most 255 classes");
  const std::size_t plane = s[2] * s[3];
  const auto v = probabilities.values();
  std::vector<std::uint8_t> out(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    double best_v = v[(n * s[1]) * plane + i];
    for (std::size_t c = 1; c < s[1]; ++c) {
      const double x = v[(n * s[1] + c) * plane + i];
      if (x > best_v) {
        best_v = x;
        best = c;
      }
    }
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  r.count = values.size();
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

}  // namespace cxrseg
