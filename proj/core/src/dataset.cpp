#include "cxrseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cxrseg/errors.hpp"
#include "cxrseg/rng.hpp"

namespace fs = std::filesystem;

namespace cxrseg {

fs::path Manifest::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : root / path;
}

const ManifestRecord& Manifest::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw DataError("id '" + id + "' not found in manifest");
}

namespace {

std::map<std::string, std::string> files_by_stem(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".png" && ext != ".pgm" && ext != ".PNG" && ext != ".PGM") continue;
    out[entry.path().stem().string()] = entry.path().filename().string();
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw DataError("CSV field contains a separator: '" + s + "'");
}

}  // namespace

Manifest build_manifest(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " not found");
  const auto images = files_by_stem(root / "images");
  const auto lungs = files_by_stem(root / "masks" / "lung");
  const auto hearts = files_by_stem(root / "masks" / "heart");
  std::set<std::string> all;
  for (const auto* m : {&images, &lungs, &hearts})
    for (const auto& [stem, _] : *m) all.insert(stem);

  Manifest manifest;
  manifest.root = root;
  std::vector<std::string> orphans;
  for (const auto& id : all) {
    if (!images.count(id) || !lungs.count(id) || !hearts.count(id)) {
      orphans.push_back(id);
      continue;
    }
    manifest.records.push_back({id, "images/" + images.at(id), "masks/lung/" + lungs.at(id),
                                "masks/heart/" + hearts.at(id), ""});
  }
  if (!orphans.empty()) {
    std::string msg = "incomplete image/mask triplets for ids:";
    for (const auto& id : orphans) msg += " " + id;
    throw DataError(msg);
  }
  return manifest;
}

void write_manifest_csv(const fs::path& path, const Manifest& manifest) {
  const bool with_checksum = std::any_of(manifest.records.begin(), manifest.records.end(),
                                         [](const auto& r) { return !r.checksum.empty(); });
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "id,image,lung_mask,heart_mask" << (with_checksum ? ",checksum" : "") << "\n";
  for (const auto& r : manifest.records) {
    for (const auto* f : {&r.id, &r.image, &r.lung_mask, &r.heart_mask, &r.checksum})
      check_field(*f);
    os << r.id << "," << r.image << "," << r.lung_mask << "," << r.heart_mask;
    if (with_checksum) os << "," << r.checksum;
    os << "\n";
  }
  if (!os) throw DataError("failed writing " + path.string());
}

Manifest read_manifest_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": empty manifest");
  const auto header = split_csv_line(line);
  const std::vector<std::string> base{"id", "image", "lung_mask", "heart_mask"};
  const bool with_checksum = header.size() == 5 && header[4] == "checksum";
  if (!std::equal(base.begin(), base.end(), header.begin(), header.end() - (with_checksum ? 1 : 0)))
    throw DataError(path.string() + ": unexpected manifest header '" + line + "'");
  Manifest m;
  m.root = path.parent_path();
  std::set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields");
    if (!ids.insert(f[0]).second)
      throw DataError(path.string() + ": duplicate id '" + f[0] + "'");
    m.records.push_back({f[0], f[1], f[2], f[3], with_checksum ? f[4] : ""});
  }
  return m;
}

std::string file_checksum(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string record_checksum(const Manifest& manifest, const ManifestRecord& r) {
  return file_checksum(manifest.resolve(r.image)) + file_checksum(manifest.resolve(r.lung_mask)) +
         file_checksum(manifest.resolve(r.heart_mask));
}

void add_checksums(Manifest& manifest) {
  for (auto& r : manifest.records) r.checksum = record_checksum(manifest, r);
}

std::vector<std::string> verify_checksums(const Manifest& manifest) {
  std::vector<std::string> drifted;
  for (const auto& r : manifest.records)
    if (!r.checksum.empty() && record_checksum(manifest, r) != r.checksum) drifted.push_back(r.id);
  return drifted;
}

// ---------------------------------------------------------------------------

Split split_manifest(const Manifest& manifest, const SplitSpec& spec) {
  if (manifest.records.empty()) throw ConfigError("cannot split an empty manifest");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(spec.seed, 0x73706c6974));
  rng.shuffle(ids);

  const auto n = ids.size();
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * spec.train_fraction + 1e-9));
  Split s;
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  if (spec.mode == SplitSpec::Mode::fraction) {
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  } else {
    if (spec.train_count == 0 || spec.train_count > n_train)
      throw ConfigError("split.train_count " + std::to_string(spec.train_count) +
                        " exceeds the " + std::to_string(n_train) + " available training records");
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(spec.train_count));
  }
  return s;
}

void write_split_csv(const fs::path& path, const Split& split) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "id,role\n";
  for (const auto& id : split.train) {
    check_field(id);
    os << id << ",train\n";
  }
  for (const auto& id : split.test) {
    check_field(id);
    os << id << ",test\n";
  }
  if (!os) throw DataError("failed writing " + path.string());
}

Split read_split_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open split file " + path.string());
  std::string line;
  if (!std::getline(is, line) || split_csv_line(line) != std::vector<std::string>{"id", "role"})
    throw DataError(path.string() + ": expected header 'id,role'");
  Split s;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw DataError(path.string() + ": malformed row '" + line + "'");
    if (f[1] == "train")
      s.train.push_back(f[0]);
    else if (f[1] == "test")
      s.test.push_back(f[0]);
    else
      throw DataError(path.string() + ": unknown role '" + f[1] + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> merge_masks(const RawImage& lung, const RawImage& heart) {
  if (lung.width != heart.width || lung.height != heart.height)
    throw DataError("lung and heart masks differ in size");
  std::vector<std::uint8_t> labels(lung.pixels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (heart.pixels[i] != 0)
      labels[i] = 2;
    else if (lung.pixels[i] != 0)
      labels[i] = 1;
  }
  return labels;
}

Tensor one_hot(const std::vector<std::uint8_t>& labels, std::size_t height, std::size_t width,
               std::size_t classes) {
  if (labels.size() != height * width) throw ShapeError("label map does not match extents");
  Tensor t({classes, height, width});
  auto v = t.values();
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < plane; ++i) {
    if (labels[i] >= classes) throw DataError("label " + std::to_string(labels[i]) + " out of range");
    v[labels[i] * plane + i] = 1.0;
  }
  return t;
}

Sample load_sample(const Manifest& manifest, const ManifestRecord& record,
                   const PreprocessConfig& config) {
  const RawImage image = read_image(manifest.resolve(record.image));
  const RawImage lung = resize_nearest_mask(read_image(manifest.resolve(record.lung_mask)),
                                            config.height, config.width);
  const RawImage heart = resize_nearest_mask(read_image(manifest.resolve(record.heart_mask)),
                                             config.height, config.width);
  Sample s;
  s.id = record.id;
  s.image = preprocess_image(image, config);
  s.labels = merge_masks(lung, heart);
  s.mask = one_hot(s.labels, config.height, config.width);
  return s;
}

std::vector<Sample> load_samples(const Manifest& manifest, const std::vector<std::string>& ids,
                                 const PreprocessConfig& config) {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(load_sample(manifest, manifest.find(id), config));
  return out;
}

// ---------------------------------------------------------------------------

namespace {
struct Ellipse {
  double cy, cx, ry, rx;
  bool contains(double y, double x) const {
    const double dy = (y - cy) / ry, dx = (x - cx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};
}  // namespace

SynthSample synthesize_sample(std::size_t index, std::size_t size, std::uint64_t seed) {
  if (size < 8) throw UsageError("synthetic images must be at least 8x8");
  Rng rng(derive_seed(seed, index));
  const double s = static_cast<double>(size);
  auto jitter = [&](double amount) { return rng.uniform(-amount, amount) * s; };

  const double lung_ry = 0.27 * s + jitter(0.03);
  const double lung_rx = 0.13 * s + jitter(0.02);
  const double lung_cy = 0.45 * s + jitter(0.03);
  const Ellipse right{lung_cy + jitter(0.01), 0.30 * s + jitter(0.02), lung_ry, lung_rx};
  const Ellipse left{lung_cy + jitter(0.01), 0.70 * s + jitter(0.02), lung_ry * 0.95, lung_rx};
  const Ellipse heart{0.64 * s + jitter(0.03), 0.56 * s + jitter(0.03), 0.12 * s + jitter(0.015),
                      0.15 * s + jitter(0.02)};

  // Soft tissue sets the baseline. The heart is only slightly brighter than
  // the mediastinum it overlaps, so its outline has to be inferred from
  // shape. Ribs cross the lung fields and random blobs act as distractors.
  const double body_level = 1900 + rng.uniform(-200, 200);
  const double lung_level = body_level - rng.uniform(600, 1000);
  const double heart_level = body_level + rng.uniform(150, 400);
  const double spine_level = body_level + rng.uniform(200, 450);
  const double spine_half = (0.05 + rng.uniform(0.0, 0.02)) * s;
  const double grad_y = rng.uniform(-300, 300), grad_x = rng.uniform(-300, 300);
  const double noise = 150 + rng.uniform(0, 150);

  const int ribs = 6;
  const double rib_top = lung_cy - lung_ry, rib_gap = 2.0 * lung_ry / ribs;
  const double rib_amp = rng.uniform(250, 450), rib_width = 0.015 * s + rng.uniform(0, 0.01) * s;
  const double rib_bend = rng.uniform(0.8, 1.6) / s;
  std::vector<double> rib_y(ribs);
  for (int k = 0; k < ribs; ++k) rib_y[k] = rib_top + (k + 0.5) * rib_gap + jitter(0.01);

  struct Blob {
    double cy, cx, r, amp;
  };
  std::vector<Blob> blobs(rng.below(4));
  for (auto& b : blobs)
    b = {rng.uniform(0.1, 0.9) * s, rng.uniform(0.1, 0.9) * s, rng.uniform(0.03, 0.07) * s,
         rng.uniform(-500, 500)};

  SynthSample out{RawImage(size, size, 12), RawImage(size, size, 8), RawImage(size, size, 8)};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
      const bool in_lung = right.contains(py, px) || left.contains(py, px);
      const bool in_heart = heart.contains(py, px);
      const double shade = grad_y * (py / s - 0.5) + grad_x * (px / s - 0.5);
      double v = body_level + shade;
      if (std::abs(px - 0.5 * s) < spine_half) v = spine_level + shade;
      if (in_lung) v = lung_level + 0.3 * shade;
      if (in_heart) v = heart_level + 0.3 * shade;
      // ribs curve downwards away from the midline
      const double dx = px - 0.5 * s;
      for (double ry : rib_y) {
        const double d = py - (ry + rib_bend * dx * dx);
        v += rib_amp * std::exp(-d * d / (2.0 * rib_width * rib_width));
      }
      for (const auto& b : blobs) {
        const double dy = py - b.cy, dxb = px - b.cx;
        v += b.amp * std::exp(-(dy * dy + dxb * dxb) / (2.0 * b.r * b.r));
      }
      v += noise * rng.normal_approx();
      out.image.at(y, x) = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 4095L));
      out.lung.at(y, x) = in_lung ? 255 : 0;
      out.heart.at(y, x) = in_heart ? 255 : 0;
    }
  return out;
}

Manifest synthesize_dataset(const fs::path& root, const SynthConfig& config) {
  if (config.count == 0) throw UsageError("synthetic dataset needs at least one image");
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks" / "lung");
  fs::create_directories(root / "masks" / "heart");
  Manifest m;
  m.root = root;
  for (std::size_t i = 0; i < config.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", i);
    const auto sample = synthesize_sample(i, config.size, config.seed);
    const std::string name(id);
    write_pgm(root / "images" / (name + ".pgm"), sample.image);
    write_png(root / "masks" / "lung" / (name + ".png"), sample.lung);
    write_png(root / "masks" / "heart" / (name + ".png"), sample.heart);
    m.records.push_back({name, "images/" + name + ".pgm", "masks/lung/" + name + ".png",
                         "masks/heart/" + name + ".png", ""});
  }
  add_checksums(m);
  write_manifest_csv(root / "manifest.csv", m);
  return m;
}

}  // namespace cxrseg
