#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "cxrseg/dataset.hpp"
#include "cxrseg/model.hpp"
#include "cxrseg/preprocess.hpp"
#include "cxrseg/trainer.hpp"

namespace cxrseg {

/// Flat `key = value` configuration with dotted keys. `#` starts a comment.
class FlatConfig {
 public:
  static FlatConfig parse(std::istream& is, const std::string& source = "<config>");
  static FlatConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override string.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Sorted `key=value` lines.
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Every knob of a run, resolved from a FlatConfig.
///
/// Recognised keys (defaults in parentheses):
///   seed (0)
///   data.root, data.manifest, data.split (split CSV; optional)
///   data.height, data.width (128), data.clahe (true)
///   clahe.tile_rows, clahe.tile_cols (8), clahe.clip_limit (2), clahe.bins (256)
///   split.mode (fraction | fixed_count), split.train_fraction (0.85),
///   split.train_count (10), split.seed (seed)
///   model.depth (4), model.base_channels (8), model.num_classes (3)
///   train.epochs (0 = by training-set size), train.batch_size (4), train.lr (1e-4),
///   train.beta1 (0.9), train.beta2 (0.999), train.adam_eps (1e-8),
///   train.checkpoint_every (0), train.eval_train (true),
///   train.mixup.delta (0 = mixup off), train.mixup.seed (seed)
///   loss.alpha (0.6), loss.beta (0.4), loss.gamma_inv (0.675), loss.epsilon (1e-6),
///   loss.classes (0,1,2)
struct RunConfig {
  std::uint64_t seed = 0;
  std::string data_root;
  std::string data_manifest;
  std::string data_split;
  PreprocessConfig preprocess;
  SplitSpec split;
  ModelConfig model;
  TrainConfig train;  // epochs == 0 means "choose from the training-set size"

  /// Unknown keys are a ConfigError so typos in sweeps do not go unnoticed.
  static RunConfig from(const FlatConfig& config);
  /// Fully resolved configuration, suitable for reproducing the run.
  FlatConfig effective() const;
};

/// FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

/// Version string recorded in run metadata.
const char* version_string();

}  // namespace cxrseg
