#include <gtest/gtest.h>

#include <sstream>

#include "cxrseg/errors.hpp"
#include "cxrseg/ops.hpp"
#include "cxrseg/snapshot.hpp"
#include "cxrseg/tensor.hpp"
#include "support.hpp"

using namespace cxrseg;

TEST(Tensor, ShapeAndValues) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(1), 3u);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ScalarHoldsItsValue) {
  const Tensor s = Tensor::scalar(2.5);
  EXPECT_EQ(s.numel(), 1u);
  EXPECT_DOUBLE_EQ(s.item(), 2.5);
}

TEST(Tensor, CopiesShareStorageCloneDoesNot) {
  Tensor a = Tensor::full({3}, 1.0);
  Tensor b = a;
  b.at(0) = 7.0;
  EXPECT_EQ(a.at(0), 7.0);
  Tensor c = a.clone();
  c.at(1) = 9.0;
  EXPECT_EQ(a.at(1), 1.0);
  EXPECT_FALSE(c.same_storage(a));
}

TEST(Tensor, BackwardWithoutGraphIsUsageError) {
  Tensor a = Tensor::full({1}, 1.0);
  EXPECT_THROW(a.backward(), UsageError);
}

TEST(Tensor, BackwardOnNonScalarNeedsSeed) {
  Tensor a = Tensor::full({2}, 1.0, true);
  Tensor y = scale(a, 3.0);
  EXPECT_THROW(y.backward(), UsageError);
  const std::vector<double> seed{1.0, 2.0};
  y.backward(seed);
  EXPECT_DOUBLE_EQ(a.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 6.0);
}

TEST(Tensor, SharedSubexpressionAccumulates) {
  // y = sum(x * x + x) -> dy/dx = 2x + 1
  Tensor x({3}, {1.0, -2.0, 0.5}, true);
  Tensor y = sum(add(mul(x, x), x));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 2.0);
}

TEST(Tensor, DeepChainDoesNotOverflowTheStack) {
  Tensor x = Tensor::full({1}, 1.0, true);
  Tensor y = x;
  for (int i = 0; i < 20000; ++i) y = scale(y, 1.0);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(Tensor, DetachCutsTheGraph) {
  Tensor x = Tensor::full({1}, 2.0, true);
  Tensor d = mul(x, x).detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_FALSE(d.has_grad_fn());
}

TEST(Tensor, NoGraphWhenNothingRequiresGrad) {
  Tensor a = Tensor::full({2}, 1.0);
  Tensor y = add(a, a);
  EXPECT_FALSE(y.has_grad_fn());
}

TEST(Tensor, AllFinite) {
  std::vector<double> v{1.0, 2.0};
  EXPECT_TRUE(all_finite(v));
  v.push_back(std::numeric_limits<double>::quiet_NaN());
  EXPECT_FALSE(all_finite(v));
}

TEST(Snapshot, RoundTripIsBitwise) {
  Rng rng(4);
  const Tensor t = testsupport::random_tensor({2, 3, 5}, rng);
  std::stringstream ss;
  write_snapshot(ss, t);
  EXPECT_EQ(ss.str().size(), snapshot_size(t.shape()));
  EXPECT_EQ(ss.str().substr(0, 4), "SGT1");
  const Tensor back = read_snapshot(ss);
  ASSERT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_EQ(back.at(i), t.at(i));
}

TEST(Snapshot, LayoutIsLittleEndian) {
  std::stringstream ss;
  write_snapshot(ss, Tensor::scalar(1.0));
  const std::string s = ss.str();
  ASSERT_EQ(s.size(), 4u + 8u + 8u + 8u);
  EXPECT_EQ(static_cast<unsigned char>(s[4]), 1u);  // rank
  EXPECT_EQ(static_cast<unsigned char>(s[12]), 1u);  // extent
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(static_cast<unsigned char>(s[27]), 0x3Fu);
  EXPECT_EQ(static_cast<unsigned char>(s[26]), 0xF0u);
}

TEST(Snapshot, RejectsBadMagicAndTruncation) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_snapshot(bad), DataError);
  std::stringstream ss;
  write_snapshot(ss, Tensor::full({4}, 1.0));
  std::stringstream truncated(ss.str().substr(0, ss.str().size() - 3));
  EXPECT_THROW(read_snapshot(truncated), DataError);
}
