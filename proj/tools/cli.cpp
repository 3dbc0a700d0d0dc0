#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "cxrseg/augment.hpp"
#include "cxrseg/config.hpp"
#include "cxrseg/dataset.hpp"
#include "cxrseg/errors.hpp"
#include "cxrseg/gradcheck_suite.hpp"
#include "cxrseg/image.hpp"
#include "cxrseg/metrics.hpp"
#include "cxrseg/model.hpp"
#include "cxrseg/preprocess.hpp"
#include "cxrseg/trainer.hpp"

#ifndef CXRSEG_GIT_DESCRIBE
#define CXRSEG_GIT_DESCRIBE "unknown"
#endif

namespace cxrseg::cli {

namespace fs = std::filesystem;

namespace {

// Options every subcommand accepts.
struct Common {
  std::string out;
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", c.config, "Flat key=value config file");
  sub->add_option("--set", c.sets, "Config override key=value (repeatable)");
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed (same as --set seed=N)");
}

FlatConfig gather(const Common& c, FlatConfig base = {}) {
  if (!c.config.empty()) {
    const FlatConfig file = FlatConfig::load(c.config);
    for (const auto& [k, v] : file.values()) base.set(k, v);
  }
  if (c.seed_opt && c.seed_opt->count() > 0) base.set("seed", std::to_string(c.seed));
  for (const auto& s : c.sets) base.apply_override(s);
  return base;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw UsageError("--out is required for this subcommand");
  fs::create_directories(c.out);
  return c.out;
}

std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Manifest load_manifest(const RunConfig& rc) {
  Manifest m;
  if (!rc.data_manifest.empty())
    m = read_manifest_csv(rc.data_manifest);
  else if (!rc.data_root.empty())
    m = build_manifest(rc.data_root);
  else
    throw UsageError("no data source: set data.manifest or data.root");
  const auto bad = verify_checksums(m);
  if (!bad.empty()) {
    std::string ids;
    for (const auto& id : bad) ids += (ids.empty() ? "" : ",") + id;
    throw DataError("checksum mismatch for " + ids);
  }
  return m;
}

Split resolve_split(const RunConfig& rc, const Manifest& m) {
  if (!rc.data_split.empty()) return read_split_csv(rc.data_split);
  return split_manifest(m, rc.split);
}

std::vector<std::string> ids_for_role(const Split& s, const Manifest& m, const std::string& role) {
  if (role == "train") return s.train;
  if (role == "test") return s.test;
  if (role == "all") {
    std::vector<std::string> ids;
    for (const auto& r : m.records) ids.push_back(r.id);
    return ids;
  }
  throw UsageError("--role must be train, test or all");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// Checkpoint metadata: the effective run configuration without model.* keys
// (the checkpoint stores the topology itself).
std::map<std::string, std::string> checkpoint_metadata(const RunConfig& rc) {
  std::map<std::string, std::string> meta;
  const FlatConfig effective = rc.effective();
  for (const auto& [k, v] : effective.values())
    if (k.rfind("model.", 0) != 0) meta[k] = v;
  return meta;
}

FlatConfig config_from_metadata(const Checkpoint& ck) {
  FlatConfig c;
  for (const auto& [k, v] : ck.metadata) c.set(k, v);
  c.set("model.depth", std::to_string(ck.params.config.depth));
  c.set("model.base_channels", std::to_string(ck.params.config.base_channels));
  c.set("model.num_classes", std::to_string(ck.params.config.num_classes));
  return c;
}

// ---------------------------------------------------------------------------
// rendering helpers

using Rgb = std::array<double, 3>;

Rgb class_color(std::uint8_t label) {
  switch (label) {
    case kLung: return {40, 140, 255};
    case kHeart: return {255, 70, 60};
    default: return {0, 0, 0};
  }
}

// Gray image with labels blended in at 45% opacity, appended to `rgb` at
// column offset `x0` of a canvas `canvas_w` pixels wide.
void paint_overlay(std::vector<std::uint8_t>& rgb, std::size_t canvas_w, std::size_t x0,
                   const Tensor& image, const std::vector<std::uint8_t>& labels, std::size_t h,
                   std::size_t w) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double g = 255.0 * image.at(y * w + x);
      const std::uint8_t lab = labels[y * w + x];
      const Rgb c = class_color(lab);
      const double a = lab == kBackground ? 0.0 : 0.45;
      for (int k = 0; k < 3; ++k)
        rgb[((y * canvas_w) + x0 + x) * 3 + k] =
            static_cast<std::uint8_t>(std::lround((1 - a) * g + a * c[k]));
    }
}

void paint_gray(std::vector<std::uint8_t>& rgb, std::size_t canvas_w, std::size_t x0,
                const Tensor& image, std::size_t h, std::size_t w) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k)
        rgb[((y * canvas_w) + x0 + x) * 3 + k] =
            static_cast<std::uint8_t>(std::lround(255.0 * image.at(y * w + x)));
}

// Soft 3-class mask rendered as a colour mix of the class colours.
void paint_soft_mask(std::vector<std::uint8_t>& rgb, std::size_t canvas_w, std::size_t x0,
                     const Tensor& mask, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  for (std::size_t i = 0; i < plane; ++i) {
    Rgb c{0, 0, 0};
    for (std::uint8_t cls = 1; cls < 3; ++cls) {
      const Rgb cc = class_color(cls);
      for (int k = 0; k < 3; ++k) c[k] += mask.at(cls * plane + i) * cc[k];
    }
    const std::size_t y = i / w, x = i % w;
    for (int k = 0; k < 3; ++k)
      rgb[((y * canvas_w) + x0 + x) * 3 + k] =
          static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 255.0)));
  }
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_synth(const Common& c, std::size_t count, std::size_t size, std::ostream& out,
              std::ostream& err) {
  const auto dir = require_out(c);
  const RunConfig rc = RunConfig::from(gather(c));
  SynthConfig sc;
  sc.count = count;
  sc.size = size;
  sc.seed = rc.seed;
  const Manifest m = synthesize_dataset(dir, sc);
  err << "synth: wrote " << m.records.size() << " images of " << size << "x" << size << " to "
      << dir.string() << "\n";
  out << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int cmd_split(const Common& c, std::ostream& out, std::ostream& err) {
  const auto dir = require_out(c);
  const RunConfig rc = RunConfig::from(gather(c));
  const Manifest m = load_manifest(rc);
  const Split s = split_manifest(m, rc.split);
  write_split_csv(dir / "split.csv", s);
  rc.effective().save(dir / "effective.cfg");
  err << "split: " << s.train.size() << " train / " << s.test.size() << " test\n";
  out << "train," << s.train.size() << "\ntest," << s.test.size() << "\n";
  return kExitOk;
}

int cmd_preprocess(const Common& c, std::ostream& out, std::ostream& err) {
  const auto dir = require_out(c);
  const RunConfig rc = RunConfig::from(gather(c));
  const Manifest m = load_manifest(rc);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks" / "lung");
  fs::create_directories(dir / "masks" / "heart");
  Manifest result;
  result.root = dir;
  const auto& pc = rc.preprocess;
  for (const auto& rec : m.records) {
    RawImage img = resize_bilinear(read_image(m.resolve(rec.image)), pc.height, pc.width);
    if (pc.clahe_enabled) img = clahe(img, pc.clahe);
    // stored as 16-bit PNG scaled to the full range
    RawImage wide(img.width, img.height, 16);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      wide.pixels[i] = static_cast<std::uint16_t>(
          std::lround(img.pixels[i] * 65535.0 / static_cast<double>(img.max_value())));
    const std::string image_rel = "images/" + rec.id + ".png";
    const std::string lung_rel = "masks/lung/" + rec.id + ".png";
    const std::string heart_rel = "masks/heart/" + rec.id + ".png";
    write_png(dir / image_rel, wide);
    write_png(dir / lung_rel,
              resize_nearest_mask(read_image(m.resolve(rec.lung_mask)), pc.height, pc.width));
    write_png(dir / heart_rel,
              resize_nearest_mask(read_image(m.resolve(rec.heart_mask)), pc.height, pc.width));
    result.records.push_back({rec.id, image_rel, lung_rel, heart_rel, ""});
  }
  add_checksums(result);
  write_manifest_csv(dir / "manifest.csv", result);
  rc.effective().save(dir / "effective.cfg");
  err << "preprocess: " << result.records.size() << " images at " << pc.height << "x" << pc.width
      << (pc.clahe_enabled ? " with CLAHE" : "") << "\n";
  out << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int cmd_train(const Common& c, std::ostream& out, std::ostream& err) {
  const auto dir = require_out(c);
  RunConfig rc = RunConfig::from(gather(c));
  const Manifest m = load_manifest(rc);
  const Split split = resolve_split(rc, m);
  if (split.train.empty()) throw ConfigError("training split is empty");
  if (rc.train.epochs == 0) rc.train.epochs = default_epochs(split.train.size());

  const FlatConfig effective = rc.effective();
  const std::string effective_text = effective.to_text();
  effective.save(dir / "effective.cfg");
  write_split_csv(dir / "split.csv", split);

  const auto train_set = load_samples(m, split.train, rc.preprocess);
  const auto test_set = load_samples(m, split.test, rc.preprocess);
  const auto meta = checkpoint_metadata(rc);

  {
    std::ofstream run(dir / "run.txt");
    run << "version=" << version_string() << "\n"
        << "git_describe=" << CXRSEG_GIT_DESCRIBE << "\n"
        << "config_hash=" << config_hash(effective_text) << "\n"
        << "seed=" << rc.seed << "\n"
        << "train_size=" << train_set.size() << "\n"
        << "test_size=" << test_set.size() << "\n"
        << "epochs=" << rc.train.epochs << "\n"
        << "steps=" << training_steps(train_set.size(), rc.train.epochs, rc.train.batch_size)
        << "\n"
        << "parameters=" << build_model(rc.model, rc.seed).parameter_count() << "\n";
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const CurveRow& row, ModelParams& model) {
    err << "epoch " << row.epoch << "/" << rc.train.epochs << " loss=" << fmt(row.loss)
        << " train_dsc=" << fmt(row.train_dsc, 4) << " val_dsc=" << fmt(row.val_dsc, 4)
        << " val_iou=" << fmt(row.val_iou, 4) << "\n";
    if (rc.train.checkpoint_every > 0 && row.epoch % rc.train.checkpoint_every == 0) {
      fs::create_directories(dir / "checkpoints");
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.sgm", row.epoch);
      save_checkpoint(dir / "checkpoints" / name, model, meta);
    }
  };
  TrainResult result = train(train_set, test_set, rc.model, rc.train, hooks);
  result.curves.write_csv(dir / "curves.csv");
  save_checkpoint(dir / "model.sgm", result.model, meta);

  std::vector<MetricRow> rows = metric_rows(rc.seed, "train", evaluate(result.model, train_set));
  if (!test_set.empty()) {
    const EvalReport test = evaluate(result.model, test_set);
    const auto t = metric_rows(rc.seed, "test", test);
    rows.insert(rows.end(), t.begin(), t.end());
    out << "test_mean_dsc," << fmt(test.mean_dsc.mean) << "\ntest_mean_iou,"
        << fmt(test.mean_iou.mean) << "\n";
  }
  write_metrics_csv(dir / "metrics.csv", rows);
  err << "train: run written to " << dir.string() << "\n";
  return kExitOk;
}

struct EvalInputs {
  Checkpoint checkpoint;
  RunConfig rc;
  Manifest manifest;
  std::vector<std::string> ids;
};

EvalInputs eval_inputs(const Common& c, const std::string& checkpoint, const std::string& role,
                       const std::string& ids) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  EvalInputs in{load_checkpoint(checkpoint), {}, {}, {}};
  in.rc = RunConfig::from(gather(c, config_from_metadata(in.checkpoint)));
  in.manifest = load_manifest(in.rc);
  in.ids = ids.empty() ? ids_for_role(resolve_split(in.rc, in.manifest), in.manifest, role)
                       : split_list(ids);
  if (in.ids.empty()) throw UsageError("no ids to evaluate");
  return in;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& role,
             const std::string& ids, std::ostream& out, std::ostream& err) {
  const auto dir = require_out(c);
  EvalInputs in = eval_inputs(c, checkpoint, role, ids);
  const EvalReport report =
      evaluate_checkpoint(in.checkpoint, in.manifest, in.ids, in.rc.preprocess);
  {
    std::ofstream os(dir / "eval.csv");
    os << "id,lung_dsc,lung_iou,heart_dsc,heart_iou,mean_dsc,mean_iou\n";
    for (const auto& im : report.images) {
      const auto& pc = im.metrics.per_class;
      os << im.id << "," << fmt(pc[kLung].dsc, 17) << "," << fmt(pc[kLung].iou, 17) << ","
         << fmt(pc[kHeart].dsc, 17) << "," << fmt(pc[kHeart].iou, 17) << ","
         << fmt(im.metrics.mean_dsc, 17) << "," << fmt(im.metrics.mean_iou, 17) << "\n";
    }
  }
  write_metrics_csv(dir / "metrics.csv",
                    metric_rows(in.rc.seed, ids.empty() ? role : "custom", report));
  out << "class,dsc_mean,dsc_std,iou_mean,iou_std\n";
  for (std::size_t cls : {std::size_t{kLung}, std::size_t{kHeart}})
    out << class_name(cls) << "," << fmt(report.dsc_per_class[cls].mean) << ","
        << fmt(report.dsc_per_class[cls].std) << "," << fmt(report.iou_per_class[cls].mean)
        << "," << fmt(report.iou_per_class[cls].std) << "\n";
  out << "mean," << fmt(report.mean_dsc.mean) << "," << fmt(report.mean_dsc.std) << ","
      << fmt(report.mean_iou.mean) << "," << fmt(report.mean_iou.std) << "\n";
  err << "eval: " << report.images.size() << " images\n";
  return kExitOk;
}

int cmd_predict(const Common& c, const std::string& checkpoint, const std::string& role,
                const std::string& ids, std::ostream& out, std::ostream& err) {
  const auto dir = require_out(c);
  EvalInputs in = eval_inputs(c, checkpoint, role, ids);
  const auto samples = load_samples(in.manifest, in.ids, in.rc.preprocess);
  const std::size_t h = in.rc.preprocess.height, w = in.rc.preprocess.width, gap = 4;
  for (const auto& s : samples) {
    // samples are [1, H, W]; the model wants a batch
    Tensor batch(Shape{1, 1, h, w},
                 std::vector<double>(s.image.values().begin(), s.image.values().end()));
    const auto pred = argmax_labels(forward(in.checkpoint.params, batch, false), 0);
    const std::size_t cw = 2 * w + gap;
    std::vector<std::uint8_t> rgb(cw * h * 3, 255);
    paint_overlay(rgb, cw, 0, s.image, s.labels, h, w);
    paint_overlay(rgb, cw, w + gap, s.image, pred, h, w);
    write_png_rgb(dir / (s.id + ".png"), cw, h, rgb);
    const auto m = crisp_metrics(pred, s.labels);
    out << s.id << "," << fmt(m.mean_dsc) << "," << fmt(m.mean_iou) << "\n";
  }
  err << "predict: " << samples.size() << " side-by-side images (ground truth left)\n";
  return kExitOk;
}

int cmd_mixup_preview(const Common& c, std::size_t pairs, std::uint64_t epoch, std::ostream& out,
                      std::ostream& err) {
  const auto dir = require_out(c);
  const RunConfig rc = RunConfig::from(gather(c));
  const Manifest m = load_manifest(rc);
  const Split split = resolve_split(rc, m);
  const auto samples = load_samples(m, split.train, rc.preprocess);
  MixupConfig mc = rc.train.mixup;
  mc.enabled = true;  // a preview always mixes; delta 0 falls back to the default shape
  const auto plan = plan_epoch(samples.size(), mc, epoch);
  const std::size_t h = rc.preprocess.height, w = rc.preprocess.width, gap = 4;
  const std::size_t cw = 4 * w + 3 * gap;
  std::ofstream csv(dir / "mixup.csv");
  csv << "index,first,second,lambda\n";
  for (std::size_t k = 0; k < std::min(pairs, plan.size()); ++k) {
    const auto& p = plan[k];
    const Sample& a = samples[p.first];
    const Sample& b = samples[p.second];
    const MixedSample mix = mixup(a.image, a.mask, b.image, b.mask, p.lambda);
    std::vector<std::uint8_t> rgb(cw * h * 3, 255);
    paint_overlay(rgb, cw, 0, a.image, a.labels, h, w);
    paint_overlay(rgb, cw, w + gap, b.image, b.labels, h, w);
    paint_gray(rgb, cw, 2 * (w + gap), mix.image, h, w);
    paint_soft_mask(rgb, cw, 3 * (w + gap), mix.soft_mask, h, w);
    char name[32];
    std::snprintf(name, sizeof name, "mixup_%03zu.png", k);
    write_png_rgb(dir / name, cw, h, rgb);
    char lam[40];
    std::snprintf(lam, sizeof lam, "%.17g", p.lambda);
    csv << k << "," << a.id << "," << b.id << "," << lam << "\n";
    out << a.id << "," << b.id << "," << lam << "\n";
  }
  err << "mixup-preview: delta=" << mc.delta << " epoch=" << epoch << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Common& c, bool all, const std::string& op, std::ostream& out,
                  std::ostream& err) {
  if (!all && op.empty()) throw UsageError("gradcheck needs --all or --op NAME");
  const RunConfig rc = RunConfig::from(gather(c));
  const auto results = run_gradcheck_suite(rc.seed, {}, all ? std::string() : op);
  std::ostringstream table;
  table << "op,max_rel_error,checked,seconds,status\n";
  bool ok = true, found = false;
  std::string failed;
  for (const auto& r : results) {
    if (!all && r.op != op) continue;
    found = true;
    std::size_t checked = 0;
    for (const auto& e : r.report.entries) checked += e.numel;
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.3e,%zu,%.2f,%s\n", r.op.c_str(),
                  r.report.max_rel_error(), checked, r.seconds, r.report.passed ? "pass" : "FAIL");
    table << line;
    if (!r.report.passed) {
      ok = false;
      failed += (failed.empty() ? "" : ",") + r.op;
    }
  }
  if (!found) throw UsageError("unknown gradcheck op '" + op + "'");
  out << table.str();
  err << "gradcheck: " << (ok ? "all passed" : "failures: " + failed) << "\n";
  if (!c.out.empty()) {
    const auto dir = require_out(c);
    std::ofstream(dir / "gradcheck.csv") << table.str();
  }
  if (!ok) throw NumericalError("gradient check failed for " + failed);
  return kExitOk;
}

int cmd_aggregate(const Common& c, std::size_t runs, const std::vector<std::string>& files,
                  std::ostream& out, std::ostream& err) {
  if (files.empty()) throw UsageError("aggregate needs at least one metrics.csv");
  if (runs == 0) throw UsageError("--runs must be >= 1");
  if (files.size() != runs)
    throw UsageError("--runs " + std::to_string(runs) + " but " + std::to_string(files.size()) +
                     " files given");
  std::vector<MetricRow> rows;
  for (const auto& f : files) {
    const auto r = read_metrics_csv(f);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto agg = aggregate_metrics(rows, runs);
  std::ostringstream table;
  table << "split,class,runs,dsc_mean,dsc_std,iou_mean,iou_std\n";
  for (const auto& a : agg)
    table << a.split << "," << a.cls << "," << a.dsc.count << "," << fmt(a.dsc.mean) << ","
          << fmt(a.dsc.std) << "," << fmt(a.iou.mean) << "," << fmt(a.iou.std) << "\n";
  out << table.str();
  if (!c.out.empty()) std::ofstream(require_out(c) / "aggregate.csv") << table.str();
  err << "aggregate: " << files.size() << " runs\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  const std::string kind = e.kind();
  if (kind == "usage" || kind == "config") return kExitUsage;
  if (kind == "numerical") return kExitNumerical;
  return kExitData;  // data and shape problems both come from the inputs
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chest X-ray lung and heart segmentation"};
  app.name("cxrseg");
  app.require_subcommand(1);

  Common common;
  std::size_t count = 24, size = 128, pairs = 4, runs = 0;
  std::uint64_t epoch = 1;
  std::string checkpoint, role = "test", ids, op;
  bool all = false;
  std::vector<std::string> files;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic chest-like dataset");
  add_common(synth, common);
  synth->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "Image side length")->check(CLI::Range(8, 4096));

  auto* split = app.add_subcommand("split", "Write a seeded train/test split");
  add_common(split, common);

  auto* prep = app.add_subcommand("preprocess", "Resize, equalize and store a dataset copy");
  add_common(prep, common);

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes a run directory");
  add_common(train_cmd, common);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, common);
  auto* predict = app.add_subcommand("predict", "Write ground-truth/prediction overlays");
  add_common(predict, common);
  for (auto* sub : {eval, predict}) {
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file (.sgm)")->required();
    sub->add_option("--role", role, "Split role: train, test or all");
    sub->add_option("--ids", ids, "Comma separated ids (overrides --role)");
  }

  auto* preview = app.add_subcommand("mixup-preview", "Render mixed training pairs");
  add_common(preview, common);
  preview->add_option("--pairs", pairs, "Number of pairs to render");
  preview->add_option("--epoch", epoch, "Epoch whose pairing is shown");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(grad, common);
  grad->add_flag("--all", all, "Check every op");
  grad->add_option("--op", op, "Check a single op");

  auto* agg = app.add_subcommand("aggregate", "Mean and std of metrics over runs");
  add_common(agg, common);
  agg->add_option("--runs", runs, "Expected number of runs")->required();
  agg->add_option("files", files, "metrics.csv files")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error kind=usage message=" << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, count, size, out, err);
    if (split->parsed()) return cmd_split(common, out, err);
    if (prep->parsed()) return cmd_preprocess(common, out, err);
    if (train_cmd->parsed()) return cmd_train(common, out, err);
    if (eval->parsed()) return cmd_eval(common, checkpoint, role, ids, out, err);
    if (predict->parsed()) return cmd_predict(common, checkpoint, role, ids, out, err);
    if (preview->parsed()) return cmd_mixup_preview(common, pairs, epoch, out, err);
    if (grad->parsed()) return cmd_gradcheck(common, all, op, out, err);
    if (agg->parsed()) return cmd_aggregate(common, runs, files, out, err);
  } catch (const Error& e) {
    err << "error kind=" << e.kind() << " message=" << one_line(e.what()) << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error kind=internal message=" << one_line(e.what()) << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cxrseg::cli
