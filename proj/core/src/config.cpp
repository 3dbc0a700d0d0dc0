#include "cxrseg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cxrseg/errors.hpp"

namespace cxrseg {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",           "data.root",          "data.manifest",    "data.split",
      "data.height",    "data.width",         "data.clahe",       "clahe.tile_rows",
      "clahe.tile_cols", "clahe.clip_limit",  "clahe.bins",       "split.mode",
      "split.train_fraction", "split.train_count", "split.seed",  "model.depth",
      "model.base_channels", "model.num_classes", "train.epochs", "train.batch_size",
      "train.lr",       "train.beta1",        "train.beta2",      "train.adam_eps",
      "train.checkpoint_every", "train.eval_train", "train.mixup.delta", "train.mixup.seed",
      "loss.alpha",     "loss.beta",          "loss.gamma_inv",   "loss.epsilon",
      "loss.classes"};
  return keys;
}
}  // namespace

FlatConfig FlatConfig::parse(std::istream& is, const std::string& source) {
  FlatConfig cfg;
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse(is, path.string());
}

void FlatConfig::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) throw ConfigError("empty config key");
  values_[trim(key)] = trim(value);
}

void FlatConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t FlatConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoll(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + it->second + "'");
}

std::uint64_t FlatConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    if (!it->second.empty() && it->second[0] != '-') {
      const auto v = std::stoull(it->second, &used);
      if (used == it->second.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + it->second + "'");
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + it->second + "'");
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string FlatConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

void FlatConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << to_text();
}

// ---------------------------------------------------------------------------

RunConfig RunConfig::from(const FlatConfig& c) {
  for (const auto& [k, _] : c.values())
    if (!known_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");

  auto positive = [&](const std::string& key, std::int64_t fallback) {
    const auto v = c.get_int(key, fallback);
    if (v < 1) throw ConfigError(key + " must be >= 1");
    return static_cast<std::size_t>(v);
  };

  RunConfig r;
  r.seed = c.get_u64("seed", 0);
  r.data_root = c.get_string("data.root", "");
  r.data_manifest = c.get_string("data.manifest", "");
  r.data_split = c.get_string("data.split", "");
  r.preprocess.height = positive("data.height", 128);
  r.preprocess.width = positive("data.width", 128);
  r.preprocess.clahe_enabled = c.get_bool("data.clahe", true);
  r.preprocess.clahe.tile_rows = positive("clahe.tile_rows", 8);
  r.preprocess.clahe.tile_cols = positive("clahe.tile_cols", 8);
  r.preprocess.clahe.clip_limit_factor = c.get_double("clahe.clip_limit", 2.0);
  r.preprocess.clahe.num_bins = positive("clahe.bins", 256);
  r.preprocess.clahe.validate();

  const auto mode = c.get_string("split.mode", "fraction");
  if (mode == "fraction")
    r.split.mode = SplitSpec::Mode::fraction;
  else if (mode == "fixed_count")
    r.split.mode = SplitSpec::Mode::fixed_count;
  else
    throw ConfigError("split.mode must be 'fraction' or 'fixed_count'");
  r.split.train_fraction = c.get_double("split.train_fraction", 0.85);
  r.split.train_count = positive("split.train_count", 10);
  r.split.seed = c.get_u64("split.seed", r.seed);

  r.model.depth = static_cast<int>(c.get_int("model.depth", 4));
  r.model.base_channels = static_cast<int>(c.get_int("model.base_channels", 8));
  r.model.num_classes = static_cast<int>(c.get_int("model.num_classes", 3));
  r.model.validate();
  if (r.model.num_classes != 3)
    throw ConfigError("model.num_classes must be 3 (background, lung, heart)");

  const auto epochs = c.get_int("train.epochs", 0);
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  r.train.epochs = static_cast<std::size_t>(epochs);
  r.train.batch_size = positive("train.batch_size", 4);
  r.train.adam.learning_rate = c.get_double("train.lr", 1e-4);
  r.train.adam.beta1 = c.get_double("train.beta1", 0.9);
  r.train.adam.beta2 = c.get_double("train.beta2", 0.999);
  r.train.adam.epsilon = c.get_double("train.adam_eps", 1e-8);
  const auto every = c.get_int("train.checkpoint_every", 0);
  if (every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  r.train.checkpoint_every = static_cast<std::size_t>(every);
  r.train.eval_train = c.get_bool("train.eval_train", true);
  const double delta = c.get_double("train.mixup.delta", 0.0);
  if (delta < 0.0 || !std::isfinite(delta))
    throw ConfigError("train.mixup.delta must be >= 0 (0 disables mixup)");
  r.train.mixup.enabled = delta > 0.0;
  r.train.mixup.delta = delta > 0.0 ? delta : MixupConfig{}.delta;
  r.train.mixup.seed = c.get_u64("train.mixup.seed", r.seed);
  r.train.seed = r.seed;

  r.train.loss.alpha = c.get_double("loss.alpha", 0.6);
  r.train.loss.beta = c.get_double("loss.beta", 0.4);
  r.train.loss.gamma_inv = c.get_double("loss.gamma_inv", 0.675);
  r.train.loss.epsilon = c.get_double("loss.epsilon", 1e-6);
  if (c.has("loss.classes")) {
    r.train.loss.class_set.clear();
    std::stringstream ss(c.get_string("loss.classes", ""));
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        const auto v = std::stoul(trim(item));
        if (v >= 3) throw ConfigError("loss.classes entries must be in {0,1,2}");
        r.train.loss.class_set.push_back(v);
      } catch (const std::logic_error&) {
        throw ConfigError("loss.classes must be a comma separated list of class indices");
      }
    }
  }
  r.train.loss.validate();
  if (!(r.train.adam.learning_rate > 0.0)) throw ConfigError("train.lr must be > 0");
  return r;
}

FlatConfig RunConfig::effective() const {
  FlatConfig c;
  c.set("seed", std::to_string(seed));
  if (!data_root.empty()) c.set("data.root", data_root);
  if (!data_manifest.empty()) c.set("data.manifest", data_manifest);
  if (!data_split.empty()) c.set("data.split", data_split);
  c.set("data.height", std::to_string(preprocess.height));
  c.set("data.width", std::to_string(preprocess.width));
  c.set("data.clahe", preprocess.clahe_enabled ? "true" : "false");
  c.set("clahe.tile_rows", std::to_string(preprocess.clahe.tile_rows));
  c.set("clahe.tile_cols", std::to_string(preprocess.clahe.tile_cols));
  c.set("clahe.clip_limit", fmt_double(preprocess.clahe.clip_limit_factor));
  c.set("clahe.bins", std::to_string(preprocess.clahe.num_bins));
  c.set("split.mode", split.mode == SplitSpec::Mode::fraction ? "fraction" : "fixed_count");
  c.set("split.train_fraction", fmt_double(split.train_fraction));
  c.set("split.train_count", std::to_string(split.train_count));
  c.set("split.seed", std::to_string(split.seed));
  c.set("model.depth", std::to_string(model.depth));
  c.set("model.base_channels", std::to_string(model.base_channels));
  c.set("model.num_classes", std::to_string(model.num_classes));
  c.set("train.epochs", std::to_string(train.epochs));
  c.set("train.batch_size", std::to_string(train.batch_size));
  c.set("train.lr", fmt_double(train.adam.learning_rate));
  c.set("train.beta1", fmt_double(train.adam.beta1));
  c.set("train.beta2", fmt_double(train.adam.beta2));
  c.set("train.adam_eps", fmt_double(train.adam.epsilon));
  c.set("train.checkpoint_every", std::to_string(train.checkpoint_every));
  c.set("train.eval_train", train.eval_train ? "true" : "false");
  c.set("train.mixup.delta", train.mixup.enabled ? fmt_double(train.mixup.delta) : "0");
  c.set("train.mixup.seed", std::to_string(train.mixup.seed));
  c.set("loss.alpha", fmt_double(train.loss.alpha));
  c.set("loss.beta", fmt_double(train.loss.beta));
  c.set("loss.gamma_inv", fmt_double(train.loss.gamma_inv));
  c.set("loss.epsilon", fmt_double(train.loss.epsilon));
  std::string classes;
  for (auto cls : train.loss.class_set) {
    if (!classes.empty()) classes += ",";
    classes += std::to_string(cls);
  }
  c.set("loss.classes", classes);
  return c;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* version_string() { return "cxrseg-0.1.0"; }

}  // namespace cxrseg
