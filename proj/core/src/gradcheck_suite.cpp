#include "cxrseg/gradcheck_suite.hpp"

#include <chrono>
#include <functional>

#include "cxrseg/blocks.hpp"
#include "cxrseg/losses.hpp"
#include "cxrseg/model.hpp"
#include "cxrseg/ops.hpp"

namespace cxrseg {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Inputs first, then every trainable tensor of `params` after randomizing it.
void append_params(const ParamList& params, Rng& rng, std::vector<Tensor>& inputs,
                   std::vector<std::string>& names) {
  for (const auto& p : params) {
    if (!p.trainable) continue;
    Tensor t = p.tensor;
    for (auto& v : t.values()) v = rng.uniform(-0.5, 0.5);
    inputs.push_back(t);
    names.push_back(p.name);
  }
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(std::uint64_t seed, const GradcheckOptions& options,
                                            const std::string& only) {
  std::vector<SuiteEntry> out;
  Rng rng(0);
  std::uint64_t stream = 0;
  std::uint64_t index = 0;
  // Every op draws from its own streams, so checking a single op sees the
  // same inputs as the full suite.
  auto timed = [&](const std::string& op, const std::function<GradcheckReport()>& run) {
    ++index;
    if (!only.empty() && op != only) return;
    rng = Rng(derive_seed(seed, index << 8));
    stream = (index << 8) + 1;
    const auto t0 = std::chrono::steady_clock::now();
    SuiteEntry e{op, run(), 0.0};
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(e));
  };
  auto next_seed = [&] { return derive_seed(seed, stream++); };

  timed("conv2d", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], in[2], 1, 1); },
                     {{1, 2, 4, 4}, {3, 2, 3, 3}, {3}}, next_seed(), options);
  });
  timed("conv2d_stride2", [&] {
    return gradcheck(
        [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], Tensor(), 2, 0); },
        {{1, 2, 6, 6}, {2, 2, 2, 2}}, next_seed(), options);
  });
  timed("max_pool2d", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return max_pool2d(in[0]); },
                     {{2, 2, 6, 4}}, next_seed(), options);
  });
  timed("batch_norm", [&] {
    auto bn = BatchNormParams::make(3);
    for (auto& v : bn.scale.values()) v = rng.uniform(0.5, 1.5);
    for (auto& v : bn.shift.values()) v = rng.uniform(-0.5, 0.5);
    const Tensor x = random_tensor({2, 3, 3, 3}, rng);
    return gradcheck([&bn](const std::vector<Tensor>& in) { return batch_norm(in[0], bn, true); },
                     {x, bn.scale, bn.shift}, {"x", "scale", "shift"}, next_seed(), options);
  });
  timed("sigmoid", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return sigmoid(in[0]); }, {{2, 3, 3, 3}},
                     next_seed(), options);
  });
  timed("relu", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return relu(in[0]); }, {{2, 3, 3, 3}},
                     next_seed(), options);
  });
  timed("tanh", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return tanh(in[0]); }, {{2, 3, 3, 3}},
                     next_seed(), options);
  });
  timed("softmax_channels", [&] {
    return gradcheck([](const std::vector<Tensor>& in) { return softmax_channels(in[0]); },
                     {{2, 3, 3, 2}}, next_seed(), options);
  });
  timed("upsample_concat_mul", [&] {
    return gradcheck(
        [](const std::vector<Tensor>& in) {
          return mul(concat_channels(upsample_nearest2x(in[0]), in[1]), in[2]);
        },
        {{1, 2, 2, 3}, {1, 1, 4, 6}, {1, 1, 4, 6}}, next_seed(), options);
  });
  timed("convlstm_step", [&] {
    auto cell = ConvLSTMCellParams::make(2, 2, rng);
    std::vector<Tensor> inputs{random_tensor({1, 2, 3, 3}, rng), random_tensor({1, 2, 3, 3}, rng),
                               random_tensor({1, 2, 3, 3}, rng)};
    std::vector<std::string> names{"x", "h", "c"};
    ParamList params;
    cell.collect("cell", params);
    append_params(params, rng, inputs, names);
    return gradcheck(
        [&cell](const std::vector<Tensor>& in) {
          const LstmState s = convlstm_step(in[0], {in[1], in[2]}, cell);
          return concat_channels(s.h, s.c);
        },
        inputs, names, next_seed(), options);
  });
  timed("biconvlstm_fuse", [&] {
    auto fuser = BiConvLSTMParams::make(2, 2, 2, rng);
    std::vector<Tensor> inputs{random_tensor({1, 2, 3, 3}, rng), random_tensor({1, 2, 3, 3}, rng)};
    std::vector<std::string> names{"a", "b"};
    ParamList params;
    fuser.collect("fuser", params);
    append_params(params, rng, inputs, names);
    return gradcheck(
        [&fuser](const std::vector<Tensor>& in) {
          const std::array<Tensor, 2> seq{in[0], in[1]};
          return bidirectional_convlstm_fuse(seq, fuser);
        },
        inputs, names, next_seed(), options);
  });
  timed("attention_gate", [&] {
    auto gate = AttentionGateParams::make(4, 8, rng);
    std::vector<Tensor> inputs{random_tensor({1, 4, 8, 8}, rng), random_tensor({1, 8, 4, 4}, rng)};
    std::vector<std::string> names{"x", "g"};
    ParamList params;
    gate.collect("gate", params);
    append_params(params, rng, inputs, names);
    return gradcheck(
        [&gate](const std::vector<Tensor>& in) { return attention_gate(in[0], in[1], gate).gated; },
        inputs, names, next_seed(), options);
  });
  timed("model_focal_tversky", [&] {
    ModelConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 2;
    auto model = build_model(cfg, derive_seed(seed, 0x6d6f64656c));
    const Tensor x = random_tensor({1, 1, 16, 16}, rng, 0.0, 1.0);
    Tensor target({1, 3, 16, 16});
    for (std::size_t i = 0; i < 256; ++i) target.at(rng.below(3) * 256 + i) = 1.0;
    std::vector<Tensor> inputs{x};
    std::vector<std::string> names{"input"};
    for (const auto& p : model.parameters())
      if (p.trainable) {
        inputs.push_back(p.tensor);
        names.push_back(p.name);
      }
    const LossConfig loss;
    return gradcheck(
        [&](const std::vector<Tensor>& in) {
          return focal_tversky_loss(forward(model, in[0], true), target, loss);
        },
        inputs, names, next_seed(), options);
  });
  return out;
}

}  // namespace cxrseg
