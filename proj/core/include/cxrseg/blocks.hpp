#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxrseg/ops.hpp"
#include "cxrseg/rng.hpp"
#include "cxrseg/tensor.hpp"

namespace cxrseg {

/// Named handle to a model tensor. Non-trainable entries are buffers
/// (batch-norm running statistics) that are checkpointed but not optimized.
struct ParamRef {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};
using ParamList = std::vector<ParamRef>;

struct Conv2dParams {
  Tensor weight;  // [Cout, Cin, k, k]
  Tensor bias;    // [Cout] or undefined
  int stride = 1;
  int padding = 0;

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero bias.
  static Conv2dParams make(std::size_t in, std::size_t out, std::size_t k, int stride, int padding,
                           bool with_bias, Rng& rng);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// [conv3x3 -> BN -> ReLU] x 2 with padding 1.
struct ConvBlockParams {
  Conv2dParams conv1, conv2;
  BatchNormParams bn1, bn2;

  static ConvBlockParams make(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_channels() const { return conv1.in_channels(); }
  std::size_t out_channels() const { return conv2.out_channels(); }
  void collect(const std::string& prefix, ParamList& out) const;
};

Tensor conv_block(const Tensor& input, ConvBlockParams& params, bool training);

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

/// ConvLSTM cell without peepholes. Each gate has a 3x3 input-to-state conv
/// (carrying the gate bias) and a 3x3 bias-free state-to-state conv.
struct ConvLSTMCellParams {
  std::array<Conv2dParams, 4> input_convs;
  std::array<Conv2dParams, 4> state_convs;

  static ConvLSTMCellParams make(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden_channels() const { return state_convs[0].out_channels(); }
  std::size_t in_channels() const { return input_convs[0].in_channels(); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// One ConvLSTM step:
///   i, f, o = sigmoid(Wx*x + Wh*h + b),  cand = tanh(Wx*x + Wh*h + b)
///   c' = f . c + i . cand,  h' = o . tanh(c')
LstmState convlstm_step(const Tensor& x, const LstmState& prev, const ConvLSTMCellParams& params);

/// Zero hidden/cell state matching `x` spatially.
LstmState zero_state(const Tensor& x, std::size_t hidden);

struct BiConvLSTMParams {
  ConvLSTMCellParams forward;
  ConvLSTMCellParams backward;
  Conv2dParams merge;  // 1x1, 2*hidden -> out

  static BiConvLSTMParams make(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Runs the forward cell over (seq[0], seq[1]) and the backward cell over
/// (seq[1], seq[0]), concatenates both final hidden states on channels and
/// applies the 1x1 merge conv. Only length-2 sequences are supported.
Tensor bidirectional_convlstm_fuse(std::span<const Tensor> seq, const BiConvLSTMParams& params);

/// Attention gate whose additive merge of the gating and skip projections is
/// replaced by a bidirectional ConvLSTM.
struct AttentionGateParams {
  Conv2dParams w_g;  // 1x1, C_g -> F_int, with bias
  Conv2dParams w_x;  // 2x2 stride 2, C_x -> F_int, no bias
  BiConvLSTMParams fuser;
  Conv2dParams psi;  // 1x1, F_int -> 1, with bias

  /// F_int defaults to max(1, gate_channels / 2).
  static AttentionGateParams make(std::size_t skip_channels, std::size_t gate_channels, Rng& rng);
  std::size_t inter_channels() const { return w_g.out_channels(); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct AttentionGateOutput {
  Tensor gated;      // same shape as the skip features
  Tensor attention;  // [N, 1, H, W] at the skip resolution, values in (0, 1)
};

/// `x`: skip features [N, C_x, H, W]; `g`: gating signal [N, C_g, H/2, W/2].
/// a = sigmoid(psi(relu(fuse(W_g g, W_x x)))) is computed at the coarse
/// resolution, upsampled 2x (nearest) and multiplied into every channel of x.
AttentionGateOutput attention_gate(const Tensor& x, const Tensor& g,
                                   const AttentionGateParams& params);

}  // namespace cxrseg
