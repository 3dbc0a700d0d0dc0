#include "cxrseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cxrseg/errors.hpp"

namespace cxrseg {

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) {
    if (!f.empty() && f.back() == '\r') f.pop_back();
    out.push_back(f);
  }
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": invalid number '" + s + "'");
  }
}
}  // namespace

// ---------------------------------------------------------------------------

void adam_step(std::span<Tensor> params, std::span<const std::string> names, AdamState& state,
               const AdamConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k].numel(), 0.0);
      state.v[k].assign(params[k].numel(), 0.0);
    }
    state.step = 0;
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = params[k].grad();
    if (!all_finite(g)) {
      double norm = 0.0;
      for (double x : g) norm += x * x;
      throw NumericalError("non-finite gradient in " +
                           (k < names.size() ? names[k] : "param" + std::to_string(k)) +
                           " (norm " + fmt17(std::sqrt(norm)) + ")");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = params[k].grad();
    auto w = params[k].values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("train.lr must be > 0");
  loss.validate();
  if (mixup.enabled) mixup.validate();
}

std::size_t default_epochs(std::size_t train_size) {
  if (train_size <= 10) return 1000;
  if (train_size <= 20) return 500;
  return 50;
}

std::size_t training_steps(std::size_t train_size, std::size_t epochs, std::size_t batch_size) {
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  return (train_size + batch_size - 1) / batch_size * epochs;
}

void CurveLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "epoch,train_dsc,train_iou,val_dsc,val_iou,loss\n";
  for (const auto& r : rows)
    os << r.epoch << "," << fmt17(r.train_dsc) << "," << fmt17(r.train_iou) << ","
       << fmt17(r.val_dsc) << "," << fmt17(r.val_iou) << "," << fmt17(r.loss) << "\n";
  if (!os) throw DataError("failed writing " + path.string());
}

CurveLog CurveLog::read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (split_fields(line) !=
      std::vector<std::string>{"epoch", "train_dsc", "train_iou", "val_dsc", "val_iou", "loss"})
    throw DataError(path.string() + ": unexpected curve header");
  CurveLog log;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) throw DataError(path.string() + ": malformed row '" + line + "'");
    CurveRow r;
    r.epoch = static_cast<std::size_t>(parse_double(f[0], path));
    r.train_dsc = parse_double(f[1], path);
    r.train_iou = parse_double(f[2], path);
    r.val_dsc = parse_double(f[3], path);
    r.val_iou = parse_double(f[4], path);
    r.loss = parse_double(f[5], path);
    log.rows.push_back(r);
  }
  return log;
}

// ---------------------------------------------------------------------------

namespace {

struct Batch {
  Tensor images;   // [B, 1, H, W]
  Tensor targets;  // [B, C, H, W]
};

// Stacks per-sample [C, H, W] tensors into [B, C, H, W].
Tensor stack(const std::vector<const Tensor*>& items) {
  Shape s = items.front()->shape();
  s.insert(s.begin(), items.size());
  Tensor out(s);
  auto dst = out.values();
  std::size_t off = 0;
  for (const auto* t : items) {
    if (t->shape() != items.front()->shape())
      throw ShapeError("samples in a batch differ in shape: " + shape_str(t->shape()) + " vs " +
                       shape_str(items.front()->shape()));
    std::copy(t->values().begin(), t->values().end(), dst.begin() + static_cast<long>(off));
    off += t->numel();
  }
  return out;
}

std::vector<std::string> param_names(const ModelParams& model) {
  std::vector<std::string> names;
  for (const auto& p : model.parameters())
    if (p.trainable) names.push_back(p.name);
  return names;
}

}  // namespace

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  model_config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (config.mixup.enabled && train_set.size() < 2)
    throw ConfigError("mixup needs at least two training samples");

  TrainResult result{build_model(model_config, config.seed), {}};
  ModelParams& model = result.model;
  std::vector<Tensor> params = model.trainable();
  const std::vector<std::string> names = param_names(model);
  AdamState adam;

  const std::size_t n = train_set.size();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto plan = plan_epoch(n, config.mixup, epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(config.seed, 0x6f72646572000000ULL + epoch));
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<MixedSample> mixed;
      std::vector<const Tensor*> images, masks;
      mixed.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const MixPlan& mp = plan[order[k]];
        if (!config.mixup.enabled) {
          images.push_back(&train_set[mp.first].image);
          masks.push_back(&train_set[mp.first].mask);
          continue;
        }
        const Sample& a = train_set[mp.first];
        const Sample& b = train_set[mp.second];
        mixed.push_back(mixup(a.image, a.mask, b.image, b.mask, mp.lambda));
        images.push_back(&mixed.back().image);
        masks.push_back(&mixed.back().soft_mask);
      }
      const Batch batch{stack(images), stack(masks)};

      for (auto& p : params) p.zero_grad();
      const Tensor probs = forward(model, batch.images, true);
      const Tensor loss = focal_tversky_loss(probs, batch.targets, config.loss);
      if (!std::isfinite(loss.item()))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      loss.backward();
      try {
        adam_step(params, names, adam, config.adam);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += loss.item();
      ++batches;
    }

    CurveRow row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(batches);
    if (config.eval_train) {
      const EvalReport tr = evaluate(model, train_set, config.batch_size);
      row.train_dsc = tr.mean_dsc.mean;
      row.train_iou = tr.mean_iou.mean;
    }
    if (!val.empty()) {
      const EvalReport vr = evaluate(model, val, config.batch_size);
      row.val_dsc = vr.mean_dsc.mean;
      row.val_iou = vr.mean_iou.mean;
    }
    result.curves.rows.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row, model);
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

double nonincreasing_window_fraction(const std::vector<double>& losses, std::size_t window) {
  if (window == 0 || losses.size() < window + 1) return 1.0;
  std::vector<double> smooth;
  for (std::size_t i = 0; i + window <= losses.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) s += losses[i + k];
    smooth.push_back(s / static_cast<double>(window));
  }
  std::size_t ok = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i)
    if (smooth[i] <= smooth[i - 1]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(smooth.size() - 1);
}

// ---------------------------------------------------------------------------

EvalReport evaluate(ModelParams& model, const std::vector<Sample>& samples,
                    std::size_t batch_size) {
  if (samples.empty()) throw UsageError("evaluation needs at least one sample");
  if (batch_size == 0) batch_size = 1;
  EvalReport report;
  const std::size_t classes = static_cast<std::size_t>(model.config.num_classes);
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Tensor*> images;
    for (std::size_t k = start; k < end; ++k) images.push_back(&samples[k].image);
    const Tensor probs = forward(model, stack(images), false);
    for (std::size_t k = start; k < end; ++k) {
      const auto pred = argmax_labels(probs, k - start);
      report.images.push_back({samples[k].id, crisp_metrics(pred, samples[k].labels, classes)});
    }
  }
  report.dsc_per_class.resize(classes);
  report.iou_per_class.resize(classes);
  std::vector<double> dsc, iou;
  for (std::size_t c = 0; c < classes; ++c) {
    dsc.clear();
    iou.clear();
    for (const auto& im : report.images) {
      dsc.push_back(im.metrics.per_class[c].dsc);
      iou.push_back(im.metrics.per_class[c].iou);
    }
    report.dsc_per_class[c] = mean_std(dsc);
    report.iou_per_class[c] = mean_std(iou);
  }
  dsc.clear();
  iou.clear();
  for (const auto& im : report.images) {
    dsc.push_back(im.metrics.mean_dsc);
    iou.push_back(im.metrics.mean_iou);
  }
  report.mean_dsc = mean_std(dsc);
  report.mean_iou = mean_std(iou);
  return report;
}

EvalReport evaluate_checkpoint(Checkpoint& checkpoint, const Manifest& manifest,
                               const std::vector<std::string>& ids,
                               const PreprocessConfig& preprocess) {
  if (ids.empty()) throw UsageError("evaluation id set is empty");
  auto check = [&](const char* key, std::size_t actual) {
    auto it = checkpoint.metadata.find(key);
    if (it != checkpoint.metadata.end() && it->second != std::to_string(actual))
      throw ShapeError(std::string("checkpoint was trained with ") + key + "=" + it->second +
                       " but evaluation data has " + std::to_string(actual));
  };
  check("data.height", preprocess.height);
  check("data.width", preprocess.width);
  const auto samples = load_samples(manifest, ids, preprocess);
  return evaluate(checkpoint.params, samples);
}

// ---------------------------------------------------------------------------

std::vector<MetricRow> metric_rows(std::uint64_t seed, const std::string& split,
                                   const EvalReport& report) {
  std::vector<MetricRow> rows;
  for (std::size_t c = 1; c < report.dsc_per_class.size(); ++c)
    rows.push_back({seed, split, class_name(c), report.dsc_per_class[c].mean,
                    report.iou_per_class[c].mean});
  rows.push_back({seed, split, "mean", report.mean_dsc.mean, report.mean_iou.mean});
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "seed,split,class,dsc,iou\n";
  for (const auto& r : rows)
    os << r.seed << "," << r.split << "," << r.cls << "," << fmt17(r.dsc) << "," << fmt17(r.iou)
       << "\n";
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (split_fields(line) != std::vector<std::string>{"seed", "split", "class", "dsc", "iou"})
    throw DataError(path.string() + ": expected header 'seed,split,class,dsc,iou'");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 5) throw DataError(path.string() + ": malformed row '" + line + "'");
    MetricRow r;
    try {
      r.seed = std::stoull(f[0]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": invalid seed '" + f[0] + "'");
    }
    r.split = f[1];
    r.cls = f[2];
    r.dsc = parse_double(f[3], path);
    r.iou = parse_double(f[4], path);
    rows.push_back(r);
  }
  return rows;
}

std::vector<AggregateRow> aggregate_metrics(const std::vector<MetricRow>& rows,
                                            std::size_t expected_runs) {
  // Preserve first-appearance order of (split, class) groups.
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.split, r.cls);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].first.push_back(r.dsc);
    groups[key].second.push_back(r.iou);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : keys) {
    const auto& [dsc, iou] = groups[key];
    if (expected_runs != 0 && dsc.size() != expected_runs)
      throw DataError("group " + key.first + "/" + key.second + " has " +
                      std::to_string(dsc.size()) + " runs, expected " +
                      std::to_string(expected_runs));
    out.push_back({key.first, key.second, mean_std(dsc), mean_std(iou)});
  }
  return out;
}

}  // namespace cxrseg
