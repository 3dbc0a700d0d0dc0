#include <gtest/gtest.h>

#include <sstream>

#include "cxrseg/config.hpp"
#include "cxrseg/errors.hpp"
#include "support.hpp"

using namespace cxrseg;

TEST(FlatConfig, ParsesCommentsAndWhitespace) {
  std::istringstream in("# header\n seed = 7 \n\ntrain.lr=0.01 # inline\n");
  const auto c = FlatConfig::parse(in);
  EXPECT_EQ(c.get_u64("seed", 0), 7u);
  EXPECT_DOUBLE_EQ(c.get_double("train.lr", 0), 0.01);
  EXPECT_EQ(c.values().size(), 2u);
}

TEST(FlatConfig, MalformedLinesAndValues) {
  std::istringstream in("seed\n");
  EXPECT_THROW(FlatConfig::parse(in), ConfigError);
  FlatConfig c;
  c.set("train.epochs", "ten");
  EXPECT_THROW(c.get_int("train.epochs", 1), ConfigError);
  c.set("flag", "maybe");
  EXPECT_THROW(c.get_bool("flag", true), ConfigError);
  EXPECT_THROW(c.apply_override("no_equals"), ConfigError);
}

TEST(FlatConfig, OverridesWin) {
  std::istringstream in("train.mixup.delta = 0.1\n");
  auto c = FlatConfig::parse(in);
  c.apply_override("train.mixup.delta=0.2");
  EXPECT_DOUBLE_EQ(c.get_double("train.mixup.delta", 0), 0.2);
}

TEST(RunConfig, DefaultsAndMixupSwitch) {
  FlatConfig c;
  auto r = RunConfig::from(c);
  EXPECT_FALSE(r.train.mixup.enabled);
  EXPECT_EQ(r.train.epochs, 0u);
  EXPECT_EQ(r.train.batch_size, 4u);
  EXPECT_DOUBLE_EQ(r.train.adam.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(r.train.loss.alpha, 0.6);
  EXPECT_DOUBLE_EQ(r.train.loss.gamma_inv, 0.675);
  c.set("train.mixup.delta", "0.2");
  c.set("seed", "3");
  r = RunConfig::from(c);
  EXPECT_TRUE(r.train.mixup.enabled);
  EXPECT_DOUBLE_EQ(r.train.mixup.delta, 0.2);
  EXPECT_EQ(r.train.mixup.seed, 3u);
  EXPECT_EQ(r.split.seed, 3u);
}

TEST(RunConfig, UnknownKeyAndBadValues) {
  FlatConfig c;
  c.set("train.mixup.detla", "0.2");
  EXPECT_THROW(RunConfig::from(c), ConfigError);
  FlatConfig d;
  d.set("split.mode", "random");
  EXPECT_THROW(RunConfig::from(d), ConfigError);
  FlatConfig e;
  e.set("loss.classes", "0,5");
  EXPECT_THROW(RunConfig::from(e), ConfigError);
  FlatConfig f;
  f.set("train.lr", "-1");
  EXPECT_THROW(RunConfig::from(f), ConfigError);
}

TEST(RunConfig, EffectiveConfigIsAFixedPoint) {
  FlatConfig c;
  c.set("seed", "11");
  c.set("model.depth", "3");
  c.set("loss.classes", "1,2");
  c.set("train.mixup.delta", "0.3");
  c.set("clahe.clip_limit", "inf");
  const auto r = RunConfig::from(c);
  const auto eff = r.effective();
  const auto again = RunConfig::from(eff).effective();
  EXPECT_EQ(eff.to_text(), again.to_text());
  EXPECT_EQ(r.train.loss.class_set, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(std::isinf(RunConfig::from(eff).preprocess.clahe.clip_limit_factor));
}

TEST(Hash, StableAndSensitive) {
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");
  EXPECT_NE(config_hash("a=1\n"), config_hash("a=2\n"));
  EXPECT_EQ(config_hash("a=1\n").size(), 16u);
}
