#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cxrseg/errors.hpp"
#include "cxrseg/metrics.hpp"
#include "support.hpp"

using namespace cxrseg;

TEST(CrispMetrics, IdenticalMapsScoreOne) {
  const std::vector<std::uint8_t> m{0, 1, 1, 2, 2, 0, 1, 0};
  const auto r = crisp_metrics(m, m);
  for (const auto& c : r.per_class) {
    EXPECT_EQ(c.dsc, 1.0);
    EXPECT_EQ(c.iou, 1.0);
  }
  EXPECT_EQ(r.mean_dsc, 1.0);
}

TEST(CrispMetrics, DisjointSetsScoreZero) {
  const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 0, 1, 1};
  const auto r = crisp_metrics(a, b, 2);
  EXPECT_EQ(r.per_class[1].dsc, 0.0);
  EXPECT_EQ(r.per_class[1].iou, 0.0);
}

TEST(CrispMetrics, HandSetArithmetic) {
  // X has 4 pixels, Y has 6, overlap 3
  std::vector<std::uint8_t> x(12, 0), y(12, 0);
  for (int i : {0, 1, 2, 3}) x[i] = 1;
  for (int i : {1, 2, 3, 4, 5, 6}) y[i] = 1;
  const auto r = crisp_metrics(x, y, 2);
  EXPECT_EQ(r.per_class[1].counts.tp, 3u);
  EXPECT_EQ(r.per_class[1].counts.fp, 1u);
  EXPECT_EQ(r.per_class[1].counts.fn, 3u);
  EXPECT_DOUBLE_EQ(r.per_class[1].dsc, 0.6);
  EXPECT_DOUBLE_EQ(r.per_class[1].iou, 3.0 / 7.0);
}

TEST(CrispMetrics, HeadlineIsForegroundMean) {
  const std::vector<std::uint8_t> pred{0, 1, 1, 2}, truth{0, 1, 2, 2};
  const auto r = crisp_metrics(pred, truth);
  EXPECT_DOUBLE_EQ(r.mean_dsc, 0.5 * (r.per_class[1].dsc + r.per_class[2].dsc));
  EXPECT_DOUBLE_EQ(r.mean_iou, 0.5 * (r.per_class[1].iou + r.per_class[2].iou));
}

TEST(CrispMetrics, UnknownLabelIsDataError) {
  const std::vector<std::uint8_t> a{0, 3}, b{0, 1};
  EXPECT_THROW(crisp_metrics(a, b), DataError);
  EXPECT_THROW(crisp_metrics(b, a), DataError);
  const std::vector<std::uint8_t> c{0};
  EXPECT_THROW(crisp_metrics(b, c), ShapeError);
}

TEST(CrispMetrics, IoUDscIdentityOnRandomPairs) {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<std::uint8_t> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<std::uint8_t>(rng.below(3));
      b[i] = static_cast<std::uint8_t>(rng.below(3));
    }
    const auto r = crisp_metrics(a, b);
    for (const auto& c : r.per_class) {
      EXPECT_LE(std::abs(c.iou - c.dsc / (2.0 - c.dsc)), 1e-12);
      // exact in rationals: IoU = TP / (TP + FP + FN) and DSC / (2 - DSC)
      // reduce to the same fraction, TP / (TP + FP + FN).
      const auto& k = c.counts;
      const std::uint64_t s2 = 2 * k.tp + k.fp + k.fn;
      if (s2 == 0) continue;
      // DSC/(2-DSC) = 2TP / (2 s2 - 2TP); compare cross products as integers
      EXPECT_EQ(2 * k.tp * (k.tp + k.fp + k.fn), k.tp * (2 * s2 - 2 * k.tp));
    }
  }
}

TEST(Argmax, TiesGoToLowestClass) {
  Tensor p({1, 3, 1, 3}, {0.4, 0.2, 0.3, 0.4, 0.5, 0.3, 0.2, 0.3, 0.4});
  const auto labels = argmax_labels(p, 0);
  EXPECT_EQ(labels, (std::vector<std::uint8_t>{0, 1, 2}));
}

TEST(MeanStd, SampleStandardDeviation) {
  const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const auto m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.std, std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_EQ(m.count, 8u);
  const std::vector<double> one{3.0};
  EXPECT_EQ(mean_std(one).std, 0.0);
}
