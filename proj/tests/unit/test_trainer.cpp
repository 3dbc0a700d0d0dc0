#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "cxrseg/errors.hpp"
#include "cxrseg/trainer.hpp"
#include "support.hpp"

using namespace cxrseg;

namespace {

std::vector<Sample> tiny_samples(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::vector<Sample> out;
  PreprocessConfig pc;
  pc.height = pc.width = size;
  pc.clahe_enabled = false;
  for (std::size_t i = 0; i < n; ++i) {
    const SynthSample s = synthesize_sample(i, size, seed);
    Sample smp;
    smp.id = "s" + std::to_string(i);
    smp.image = preprocess_image(s.image, pc);
    smp.labels = merge_masks(s.lung, s.heart);
    smp.mask = one_hot(smp.labels, size, size);
    out.push_back(std::move(smp));
  }
  return out;
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.depth = 1;
  c.base_channels = 2;
  return c;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::full({1}, 3.0, true);
  const std::vector<double> g{1.0};
  w.accumulate_grad(g);
  std::vector<Tensor> params{w};
  const std::vector<std::string> names{"w"};
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step(params, names, st, cfg);
  // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
  EXPECT_NEAR(w.at(0), 3.0 - 0.01, 1e-9);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor w({2}, {1.0, -2.0}, true);
  std::vector<Tensor> params{w};
  const std::vector<std::string> names{"w"};
  AdamState st;
  for (int i = 0; i < 3; ++i) {
    w.zero_grad();
    w.accumulate_grad(std::vector<double>{0.0, 0.0});
    adam_step(params, names, st, AdamConfig{});
  }
  EXPECT_EQ(w.at(0), 1.0);
  EXPECT_EQ(w.at(1), -2.0);
}

TEST(Adam, QuadraticBowlDecreasesMonotonically) {
  // f(w) = sum (w - c)^2
  Tensor w({3}, {2.0, -1.0, 0.5}, true);
  const std::vector<double> c{-0.3, 0.7, 0.1};
  std::vector<Tensor> params{w};
  const std::vector<std::string> names{"w"};
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  auto f = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += std::pow(w.at(i) - c[i], 2);
    return s;
  };
  double prev = f();
  for (int step = 0; step < 10; ++step) {
    w.zero_grad();
    std::vector<double> g(3);
    for (std::size_t i = 0; i < 3; ++i) g[i] = 2.0 * (w.at(i) - c[i]);
    w.accumulate_grad(g);
    adam_step(params, names, st, cfg);
    const double now = f();
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(Adam, NonFiniteGradientAbortsWithoutUpdating) {
  Tensor a = Tensor::full({2}, 1.0, true), b = Tensor::full({1}, 1.0, true);
  a.accumulate_grad(std::vector<double>{0.5, 0.5});
  b.accumulate_grad(std::vector<double>{std::nan("")});
  std::vector<Tensor> params{a, b};
  const std::vector<std::string> names{"a", "layer.b"};
  AdamState st;
  try {
    adam_step(params, names, st, AdamConfig{});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.b"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("norm"), std::string::npos);
  }
  EXPECT_EQ(a.at(0), 1.0);
  EXPECT_EQ(st.step, 0u);
}

TEST(Schedule, DefaultEpochsAndSteps) {
  EXPECT_EQ(default_epochs(10), 1000u);
  EXPECT_EQ(default_epochs(20), 500u);
  EXPECT_EQ(default_epochs(209), 50u);
  EXPECT_EQ(training_steps(10, 1000, 4), 3000u);
  EXPECT_EQ(training_steps(209, 50, 4), 2650u);
  EXPECT_EQ(training_steps(10, 1000, 1), 10000u);
  EXPECT_THROW(training_steps(10, 1, 0), UsageError);
}

TEST(Curves, CsvRoundTripIsExact) {
  const auto dir = testsupport::scratch_dir("curves");
  CurveLog log;
  log.rows.push_back({1, 0.1, 1.0 / 3.0, 0.2, 0.3, 2.0 / 7.0});
  log.rows.push_back({2, 0.5, 0.6, 0.7, 0.8, 1e-17});
  log.write_csv(dir / "curves.csv");
  std::ifstream in(dir / "curves.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,train_dsc,train_iou,val_dsc,val_iou,loss");
  const CurveLog back = CurveLog::read_csv(dir / "curves.csv");
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].train_iou, 1.0 / 3.0);
  EXPECT_EQ(back.rows[0].loss, 2.0 / 7.0);
  EXPECT_EQ(back.rows[1].epoch, 2u);
}

TEST(Curves, WindowFraction) {
  EXPECT_EQ(nonincreasing_window_fraction({5, 4, 3, 2, 1}, 2), 1.0);
  EXPECT_EQ(nonincreasing_window_fraction({1, 2, 3, 4, 5}, 2), 0.0);
  EXPECT_DOUBLE_EQ(nonincreasing_window_fraction({4, 3, 5, 1, 2}, 1), 0.5);
}

TEST(Train, InvalidConfigs) {
  const auto data = tiny_samples(2, 8, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(data, {}, tiny_model(), cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.adam.learning_rate = 0.0;
  EXPECT_THROW(train(data, {}, tiny_model(), cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.mixup.enabled = true;
  EXPECT_THROW(train({data[0]}, {}, tiny_model(), cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 1;
  ModelConfig deep = tiny_model();
  deep.depth = 2;  // 10 is not a multiple of 4
  EXPECT_THROW(train(tiny_samples(1, 10, 1), {}, deep, cfg), ShapeError);
}

TEST(Train, DeterministicCurvesAndWeights) {
  const auto data = tiny_samples(3, 8, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.adam.learning_rate = 1e-2;
  cfg.mixup.enabled = true;
  cfg.seed = 5;
  cfg.mixup.seed = 5;
  const auto a = train(data, data, tiny_model(), cfg);
  const auto b = train(data, data, tiny_model(), cfg);
  ASSERT_EQ(a.curves.rows.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.curves.rows[e].epoch, e + 1);
    EXPECT_EQ(a.curves.rows[e].loss, b.curves.rows[e].loss);
    EXPECT_EQ(a.curves.rows[e].val_iou, b.curves.rows[e].val_iou);
  }
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k)
    for (std::size_t i = 0; i < pa[k].tensor.numel(); ++i)
      ASSERT_EQ(pa[k].tensor.at(i), pb[k].tensor.at(i));
}

TEST(Train, HookSeesEveryEpoch) {
  const auto data = tiny_samples(2, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 4;
  std::vector<std::size_t> seen;
  TrainHooks hooks;
  hooks.on_epoch = [&](const CurveRow& r, ModelParams&) { seen.push_back(r.epoch); };
  train(data, {}, tiny_model(), cfg, hooks);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
}

TEST(Evaluate, PerfectFixtureScoresOne) {
  // every pixel background and a head biased hard towards background
  auto samples = tiny_samples(3, 8, 4);
  for (auto& s : samples) {
    std::fill(s.labels.begin(), s.labels.end(), 0);
    s.mask = one_hot(s.labels, 8, 8);
  }
  auto model = build_model(tiny_model(), 1);
  for (auto& v : model.head.weight.values()) v = 0.0;
  model.head.bias.at(0) = 10.0;
  const EvalReport r = evaluate(model, samples);
  ASSERT_EQ(r.images.size(), 3u);
  EXPECT_EQ(r.mean_dsc.mean, 1.0);
  EXPECT_EQ(r.mean_iou.mean, 1.0);
  EXPECT_EQ(r.mean_dsc.std, 0.0);
  EXPECT_THROW(evaluate(model, {}), UsageError);
}

TEST(Evaluate, CheckpointErrors) {
  const auto dir = testsupport::scratch_dir("eval_ckpt");
  SynthConfig sc;
  sc.count = 2;
  sc.size = 16;
  const Manifest m = synthesize_dataset(dir / "data", sc);
  auto model = build_model(tiny_model(), 1);
  save_checkpoint(dir / "m.sgm", model, {{"data.height", "8"}, {"data.width", "8"}});
  Checkpoint ck = load_checkpoint(dir / "m.sgm");
  PreprocessConfig pc;
  pc.height = pc.width = 16;
  EXPECT_THROW(evaluate_checkpoint(ck, m, {"synth_0000"}, pc), ShapeError);
  EXPECT_THROW(evaluate_checkpoint(ck, m, {}, pc), UsageError);
  pc.height = pc.width = 8;
  EXPECT_EQ(evaluate_checkpoint(ck, m, {"synth_0000", "synth_0001"}, pc).images.size(), 2u);
}

TEST(Aggregate, TwoRunsHandComputed) {
  const std::vector<MetricRow> rows{{1, "test", "lung", 0.90, 0.80},
                                    {2, "test", "lung", 0.94, 0.86},
                                    {1, "test", "heart", 0.80, 0.70},
                                    {2, "test", "heart", 0.80, 0.70}};
  const auto agg = aggregate_metrics(rows, 2);
  ASSERT_EQ(agg.size(), 2u);
  const auto& lung = agg[0].cls == "lung" ? agg[0] : agg[1];
  const auto& heart = agg[0].cls == "lung" ? agg[1] : agg[0];
  EXPECT_NEAR(lung.dsc.mean, 0.92, 1e-15);
  EXPECT_NEAR(lung.dsc.std, std::sqrt(0.0008), 1e-12);  // (0.02^2 * 2) / 1
  EXPECT_NEAR(lung.iou.mean, 0.83, 1e-15);
  EXPECT_NEAR(lung.iou.std, std::sqrt(0.0018), 1e-12);
  EXPECT_EQ(heart.dsc.std, 0.0);
  EXPECT_THROW(aggregate_metrics(rows, 3), DataError);
}

TEST(Aggregate, MetricsCsvRoundTrip) {
  const auto dir = testsupport::scratch_dir("metrics_csv");
  const std::vector<MetricRow> rows{{7, "test", "lung", 0.5, 1.0 / 3.0}};
  write_metrics_csv(dir / "metrics.csv", rows);
  const auto back = read_metrics_csv(dir / "metrics.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].seed, 7u);
  EXPECT_EQ(back[0].iou, 1.0 / 3.0);
}
