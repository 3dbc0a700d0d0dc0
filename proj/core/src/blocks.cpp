#include "cxrseg/blocks.hpp"

#include <cmath>

#include "cxrseg/errors.hpp"

namespace cxrseg {

Conv2dParams Conv2dParams::make(std::size_t in, std::size_t out, std::size_t k, int stride,
                                int padding, bool with_bias, Rng& rng) {
  Conv2dParams p;
  p.weight = Tensor({out, in, k, k}, true);
  const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
  for (auto& w : p.weight.values()) w = rng.uniform(-bound, bound);
  if (with_bias) p.bias = Tensor::zeros({out}, true);
  p.stride = stride;
  p.padding = padding;
  return p;
}

void Conv2dParams::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

namespace {
void collect_bn(const std::string& prefix, const BatchNormParams& bn, ParamList& out) {
  out.push_back({prefix + ".scale", bn.scale, true});
  out.push_back({prefix + ".shift", bn.shift, true});
  out.push_back({prefix + ".running_mean", bn.running_mean, false});
  out.push_back({prefix + ".running_var", bn.running_var, false});
}
}  // namespace

// ---------------------------------------------------------------------------

ConvBlockParams ConvBlockParams::make(std::size_t in, std::size_t out, Rng& rng) {
  ConvBlockParams p;
  p.conv1 = Conv2dParams::make(in, out, 3, 1, 1, true, rng);
  p.bn1 = BatchNormParams::make(out);
  p.conv2 = Conv2dParams::make(out, out, 3, 1, 1, true, rng);
  p.bn2 = BatchNormParams::make(out);
  return p;
}

void ConvBlockParams::collect(const std::string& prefix, ParamList& out) const {
  conv1.collect(prefix + ".conv1", out);
  collect_bn(prefix + ".bn1", bn1, out);
  conv2.collect(prefix + ".conv2", out);
  collect_bn(prefix + ".bn2", bn2, out);
}

Tensor conv_block(const Tensor& input, ConvBlockParams& params, bool training) {
  if (input.rank() != 4 || input.dim(1) != params.in_channels())
    throw ShapeError("conv_block expects " + std::to_string(params.in_channels()) +
                     " input channels, got " + shape_str(input.shape()));
  Tensor y = relu(batch_norm(params.conv1(input), params.bn1, training));
  return relu(batch_norm(params.conv2(y), params.bn2, training));
}

// ---------------------------------------------------------------------------

ConvLSTMCellParams ConvLSTMCellParams::make(std::size_t in, std::size_t hidden, Rng& rng) {
  ConvLSTMCellParams p;
  for (std::size_t g = 0; g < 4; ++g) {
    p.input_convs[g] = Conv2dParams::make(in, hidden, 3, 1, 1, true, rng);
    p.state_convs[g] = Conv2dParams::make(hidden, hidden, 3, 1, 1, false, rng);
  }
  return p;
}

void ConvLSTMCellParams::collect(const std::string& prefix, ParamList& out) const {
  static constexpr const char* kGateNames[4] = {"input", "forget", "output", "candidate"};
  for (std::size_t g = 0; g < 4; ++g) {
    input_convs[g].collect(prefix + "." + kGateNames[g] + ".wx", out);
    state_convs[g].collect(prefix + "." + kGateNames[g] + ".wh", out);
  }
}

LstmState zero_state(const Tensor& x, std::size_t hidden) {
  const Shape s{x.dim(0), hidden, x.dim(2), x.dim(3)};
  return {Tensor::zeros(s), Tensor::zeros(s)};
}

LstmState convlstm_step(const Tensor& x, const LstmState& prev, const ConvLSTMCellParams& params) {
  if (x.rank() != 4 || x.dim(1) != params.in_channels())
    throw ShapeError("convlstm_step expects " + std::to_string(params.in_channels()) +
                     " input channels, got " + shape_str(x.shape()));
  const Shape state{x.dim(0), params.hidden_channels(), x.dim(2), x.dim(3)};
  if (prev.h.shape() != state || prev.c.shape() != state)
    throw ShapeError("convlstm_step state " + shape_str(prev.h.shape()) + "/" +
                     shape_str(prev.c.shape()) + " does not match " + shape_str(state));
  auto pre = [&](std::size_t g) {
    return add(params.input_convs[g](x), params.state_convs[g](prev.h));
  };
  const Tensor i = sigmoid(pre(kInputGate));
  const Tensor f = sigmoid(pre(kForgetGate));
  const Tensor o = sigmoid(pre(kOutputGate));
  const Tensor cand = tanh(pre(kCandidate));
  Tensor c = add(mul(f, prev.c), mul(i, cand));
  Tensor h = mul(o, tanh(c));
  return {std::move(h), std::move(c)};
}

// ---------------------------------------------------------------------------

BiConvLSTMParams BiConvLSTMParams::make(std::size_t in, std::size_t hidden, std::size_t out,
                                        Rng& rng) {
  BiConvLSTMParams p;
  p.forward = ConvLSTMCellParams::make(in, hidden, rng);
  p.backward = ConvLSTMCellParams::make(in, hidden, rng);
  p.merge = Conv2dParams::make(2 * hidden, out, 1, 1, 0, true, rng);
  return p;
}

void BiConvLSTMParams::collect(const std::string& prefix, ParamList& out) const {
  forward.collect(prefix + ".fwd", out);
  backward.collect(prefix + ".bwd", out);
  merge.collect(prefix + ".merge", out);
}

Tensor bidirectional_convlstm_fuse(std::span<const Tensor> seq, const BiConvLSTMParams& params) {
  if (seq.size() != 2)
    throw UsageError("bidirectional_convlstm_fuse needs a sequence of length 2, got " +
                     std::to_string(seq.size()));
  if (seq[0].shape() != seq[1].shape())
    throw ShapeError("bidirectional_convlstm_fuse: sequence shapes " + shape_str(seq[0].shape()) +
                     " and " + shape_str(seq[1].shape()) + " differ");
  LstmState fwd = zero_state(seq[0], params.forward.hidden_channels());
  for (std::size_t t = 0; t < seq.size(); ++t) fwd = convlstm_step(seq[t], fwd, params.forward);
  LstmState bwd = zero_state(seq[0], params.backward.hidden_channels());
  for (std::size_t t = seq.size(); t-- > 0;) bwd = convlstm_step(seq[t], bwd, params.backward);
  return params.merge(concat_channels(fwd.h, bwd.h));
}

// ---------------------------------------------------------------------------

AttentionGateParams AttentionGateParams::make(std::size_t skip_channels,
                                              std::size_t gate_channels, Rng& rng) {
  const std::size_t inter = std::max<std::size_t>(1, gate_channels / 2);
  AttentionGateParams p;
  p.w_g = Conv2dParams::make(gate_channels, inter, 1, 1, 0, true, rng);
  p.w_x = Conv2dParams::make(skip_channels, inter, 2, 2, 0, false, rng);
  p.fuser = BiConvLSTMParams::make(inter, inter, inter, rng);
  p.psi = Conv2dParams::make(inter, 1, 1, 1, 0, true, rng);
  return p;
}

void AttentionGateParams::collect(const std::string& prefix, ParamList& out) const {
  w_g.collect(prefix + ".w_g", out);
  w_x.collect(prefix + ".w_x", out);
  fuser.collect(prefix + ".fuser", out);
  psi.collect(prefix + ".psi", out);
}

AttentionGateOutput attention_gate(const Tensor& x, const Tensor& g,
                                   const AttentionGateParams& params) {
  if (x.rank() != 4 || g.rank() != 4)
    throw ShapeError("attention_gate expects NCHW tensors, got " + shape_str(x.shape()) + " and " +
                     shape_str(g.shape()));
  if (x.dim(0) != g.dim(0) || x.dim(2) != 2 * g.dim(2) || x.dim(3) != 2 * g.dim(3))
    throw ShapeError("attention_gate: gating signal " + shape_str(g.shape()) +
                     " must be at half the resolution of skip features " + shape_str(x.shape()));
  if (x.dim(1) != params.w_x.in_channels() || g.dim(1) != params.w_g.in_channels())
    throw ShapeError("attention_gate channel mismatch: skip " + shape_str(x.shape()) + ", gate " +
                     shape_str(g.shape()));
  // The gating projection goes first, matching the operand order of the
  // additive gate it replaces.
  const std::array<Tensor, 2> seq{params.w_g(g), params.w_x(x)};
  const Tensor fused = bidirectional_convlstm_fuse(seq, params.fuser);
  Tensor coarse = sigmoid(params.psi(relu(fused)));
  Tensor attention = upsample_nearest2x(coarse);
  Tensor gated = mul(x, attention);
  return {std::move(gated), std::move(attention)};
}

}  // namespace cxrseg
