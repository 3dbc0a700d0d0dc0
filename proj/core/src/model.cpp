#include "cxrseg/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cxrseg/errors.hpp"
#include "cxrseg/snapshot.hpp"

namespace cxrseg {

void ModelConfig::validate() const {
  if (depth < 1 || depth > 8) throw ConfigError("model.depth must be in [1, 8]");
  if (base_channels < 1) throw ConfigError("model.base_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (input_channels < 1) throw ConfigError("model.input_channels must be >= 1");
}

ModelParams build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x6d6f64656c));
  ModelParams m;
  m.config = config;
  const auto base = static_cast<std::size_t>(config.base_channels);
  const auto depth = static_cast<std::size_t>(config.depth);
  auto width = [&](std::size_t level) { return base << level; };

  m.encoder.push_back(
      ConvBlockParams::make(static_cast<std::size_t>(config.input_channels), width(0), rng));
  for (std::size_t k = 1; k <= depth; ++k)
    m.encoder.push_back(ConvBlockParams::make(width(k - 1), width(k), rng));
  for (std::size_t k = 0; k < depth; ++k) {
    m.gates.push_back(AttentionGateParams::make(width(k), width(k + 1), rng));
    m.up_convs.push_back(Conv2dParams::make(width(k + 1), width(k), 3, 1, 1, true, rng));
    m.up_norms.push_back(BatchNormParams::make(width(k)));
    m.decoder.push_back(ConvBlockParams::make(2 * width(k), width(k), rng));
  }
  m.head = Conv2dParams::make(base, static_cast<std::size_t>(config.num_classes), 1, 1, 0, true,
                              rng);
  return m;
}

ParamList ModelParams::parameters() const {
  ParamList out;
  for (std::size_t k = 0; k < encoder.size(); ++k)
    encoder[k].collect("enc" + std::to_string(k), out);
  for (std::size_t k = 0; k < decoder.size(); ++k) {
    const std::string lvl = "dec" + std::to_string(k);
    gates[k].collect(lvl + ".gate", out);
    up_convs[k].collect(lvl + ".up.conv", out);
    out.push_back({lvl + ".up.bn.scale", up_norms[k].scale, true});
    out.push_back({lvl + ".up.bn.shift", up_norms[k].shift, true});
    out.push_back({lvl + ".up.bn.running_mean", up_norms[k].running_mean, false});
    out.push_back({lvl + ".up.bn.running_var", up_norms[k].running_var, false});
    decoder[k].collect(lvl + ".block", out);
  }
  head.collect("head", out);
  return out;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (auto& p : parameters())
    if (p.trainable) out.push_back(p.tensor);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (p.trainable) n += p.tensor.numel();
  return n;
}

ForwardTrace forward_traced(ModelParams& params, const Tensor& input, bool training) {
  const auto& cfg = params.config;
  if (input.rank() != 4 || input.dim(1) != static_cast<std::size_t>(cfg.input_channels))
    throw ShapeError("model input must be [N," + std::to_string(cfg.input_channels) +
                     ",H,W], got " + shape_str(input.shape()));
  const std::size_t mult = cfg.required_multiple();
  if (input.dim(2) % mult != 0 || input.dim(3) % mult != 0)
    throw ShapeError("model input extents " + shape_str(input.shape()) +
                     " must be multiples of " + std::to_string(mult) + " for depth " +
                     std::to_string(cfg.depth));

  const auto depth = static_cast<std::size_t>(cfg.depth);
  std::vector<Tensor> skips;
  Tensor x = conv_block(input, params.encoder[0], training);
  for (std::size_t k = 1; k <= depth; ++k) {
    skips.push_back(x);
    x = conv_block(max_pool2d(x), params.encoder[k], training);
  }

  ForwardTrace trace;
  trace.attention_maps.resize(depth);
  for (std::size_t k = depth; k-- > 0;) {
    auto gate = attention_gate(skips[k], x, params.gates[k]);
    trace.attention_maps[k] = gate.attention;
    Tensor up = relu(batch_norm(params.up_convs[k](upsample_nearest2x(x)), params.up_norms[k],
                                training));
    x = conv_block(concat_channels(gate.gated, up), params.decoder[k], training);
  }
  trace.probabilities = softmax_channels(params.head(x));
  return trace;
}

Tensor forward(ModelParams& params, const Tensor& input, bool training) {
  return forward_traced(params, input, training).probabilities;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'G', 'M', '1'};

std::string config_text(const ModelConfig& c, const std::map<std::string, std::string>& meta) {
  std::ostringstream os;
  os << "model.depth=" << c.depth << "\n"
     << "model.base_channels=" << c.base_channels << "\n"
     << "model.num_classes=" << c.num_classes << "\n"
     << "model.input_channels=" << c.input_channels << "\n";
  for (const auto& [k, v] : meta)
    if (k.rfind("model.", 0) != 0) os << k << "=" << v << "\n";
  return os.str();
}

void write_string(std::ostream& os, const std::string& s) {
  io::write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, std::uint64_t limit) {
  const auto n = io::read_u64(is);
  if (n > limit) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("truncated checkpoint");
  return s;
}

int parse_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint is missing " + key);
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw DataError("checkpoint has invalid " + key);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(kCheckpointMagic, 4);
  io::write_u64(os, kCheckpointVersion);
  write_string(os, config_text(params.config, metadata));
  const auto list = params.parameters();
  io::write_u64(os, list.size());
  std::uint64_t offset = 0;
  for (const auto& p : list) {
    write_string(os, p.name);
    io::write_u64(os, offset);
    offset += snapshot_size(p.tensor.shape());
  }
  for (const auto& p : list) write_snapshot(os, p.tensor);
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  try {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kCheckpointMagic, 4))
      throw DataError("not a model checkpoint (bad magic)");
    const auto version = io::read_u64(is);
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version));

    std::map<std::string, std::string> kv;
    std::istringstream cfg(read_string(is, 1 << 20));
    for (std::string line; std::getline(cfg, line);) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ModelConfig mc;
    mc.depth = parse_int(kv, "model.depth");
    mc.base_channels = parse_int(kv, "model.base_channels");
    mc.num_classes = parse_int(kv, "model.num_classes");
    mc.input_channels = parse_int(kv, "model.input_channels");
    try {
      mc.validate();
    } catch (const ConfigError& e) {
      throw DataError(std::string("checkpoint config invalid: ") + e.what());
    }

    Checkpoint ck;
    ck.params = build_model(mc, 0);
    for (auto& [k, v] : kv)
      if (k.rfind("model.", 0) != 0) ck.metadata[k] = v;

    const auto count = io::read_u64(is);
    auto list = ck.params.parameters();
    if (count != list.size())
      throw DataError("checkpoint has " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(list.size()));
    std::uint64_t expected_offset = 0;
    for (const auto& p : list) {
      const auto name = read_string(is, 4096);
      const auto offset = io::read_u64(is);
      if (name != p.name || offset != expected_offset)
        throw DataError("checkpoint manifest mismatch at " + name);
      expected_offset += snapshot_size(p.tensor.shape());
    }
    for (auto& p : list) {
      const Tensor t = read_snapshot(is);
      if (t.shape() != p.tensor.shape())
        throw DataError("checkpoint tensor " + p.name + " has shape " + shape_str(t.shape()));
      std::copy(t.values().begin(), t.values().end(), p.tensor.values().begin());
    }
    return ck;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace cxrseg
