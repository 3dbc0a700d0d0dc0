#pragma once

#include "cxrseg/tensor.hpp"

namespace cxrseg {

// Differentiable primitives on NCHW tensors. Each op records itself on the
// graph when any input requires grad.

/// 2D cross-correlation. `bias` may be an undefined Tensor.
/// Output extents: floor((H + 2*padding - kh) / stride) + 1, same for W.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride = 1,
              int padding = 0);

/// Non-overlapping max pooling. Ties go to the first element in row-major
/// order; the gradient is routed to that element only.
Tensor max_pool2d(const Tensor& input, int window = 2, int stride = 2);

Tensor upsample_nearest2x(const Tensor& input);

/// Concatenates along the channel axis; batch and spatial extents must match.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Per-channel batch normalization state. `scale`/`shift` are trainable,
/// running statistics are buffers updated in training mode.
struct BatchNormParams {
  Tensor scale;         // [C]
  Tensor shift;         // [C]
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]

  static BatchNormParams make(std::size_t channels);
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Training mode normalizes with batch statistics over N,H,W and updates the
/// running statistics (running = 0.9 * running + 0.1 * batch). Evaluation
/// mode uses the running statistics and mutates nothing.
Tensor batch_norm(const Tensor& input, BatchNormParams& params, bool training);
Tensor batch_norm_eval(const Tensor& input, const BatchNormParams& params);

Tensor add(const Tensor& a, const Tensor& b);

/// Elementwise product. `b` may have a single channel, in which case it is
/// broadcast over the channels of `a`.
Tensor mul(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Softmax over the channel axis of an NCHW tensor.
Tensor softmax_channels(const Tensor& x);

/// Extracts channels [begin, begin + count).
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

/// Sum of all elements, returned as a one-element tensor.
Tensor sum(const Tensor& x);

/// Elementwise `x * factor`.
Tensor scale(const Tensor& x, double factor);

}  // namespace cxrseg
