#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cxrseg/blocks.hpp"

namespace cxrseg {

struct ModelConfig {
  int depth = 4;           // number of downsampling steps
  int base_channels = 64;  // channels of the first encoder level
  int num_classes = 3;     // background, lung, heart
  int input_channels = 1;

  void validate() const;
  /// Input height and width must be multiples of this.
  std::size_t required_multiple() const { return std::size_t{1} << depth; }
};

/// Attention U-Net topology with BiConvLSTM attention gates.
///
/// encoder[k] runs at 1/2^k resolution with base * 2^k channels; encoder[depth]
/// is the bottleneck. Decoder level k gates encoder[k] with the signal coming
/// from level k + 1, upsamples that signal (nearest 2x + conv3x3 + BN + ReLU)
/// and merges both with a conv block.
struct ModelParams {
  ModelConfig config;
  std::vector<ConvBlockParams> encoder;     // depth + 1 entries
  std::vector<AttentionGateParams> gates;   // depth entries, index = level
  std::vector<Conv2dParams> up_convs;       // depth entries
  std::vector<BatchNormParams> up_norms;    // depth entries
  std::vector<ConvBlockParams> decoder;     // depth entries
  Conv2dParams head;                        // 1x1, base -> num_classes

  /// Every tensor in a stable order; names are unique.
  ParamList parameters() const;
  /// Trainable tensors only.
  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
};

/// Deterministic given (config, seed).
ModelParams build_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardTrace {
  Tensor probabilities;                 // [N, classes, H, W]
  std::vector<Tensor> attention_maps;   // one per decoder level
};

/// Softmax class probabilities for a [N, 1, H, W] batch. Evaluation mode
/// (training = false) mutates nothing.
Tensor forward(ModelParams& params, const Tensor& input, bool training);
ForwardTrace forward_traced(ModelParams& params, const Tensor& input, bool training);

// Checkpoint layout, little-endian:
//   "SGM1" | version: u64 | config text length: u64 | config text (key=value lines)
//   | entry count: u64 | per entry: name length u64, name bytes, byte offset u64
//   | tensor snapshots, concatenated in manifest order.
// Offsets are relative to the start of the snapshot region.
inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::map<std::string, std::string> metadata;  // config echo, excluding model.* keys
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cxrseg
