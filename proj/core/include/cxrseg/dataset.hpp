#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxrseg/image.hpp"
#include "cxrseg/preprocess.hpp"
#include "cxrseg/tensor.hpp"

namespace cxrseg {

struct ManifestRecord {
  std::string id;
  std::string image;       // paths relative to Manifest::root unless absolute
  std::string lung_mask;
  std::string heart_mask;
  std::string checksum;    // optional FNV-1a over the three files, hex
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& p) const;
  const ManifestRecord& find(const std::string& id) const;
};

/// Scans root/images, root/masks/lung and root/masks/heart, matching files
/// by stem. Records are sorted by id. A stem present in one directory but
/// not the others is a DataError naming every orphan.
Manifest build_manifest(const std::filesystem::path& root);

/// CSV with header `id,image,lung_mask,heart_mask` (plus `,checksum` when any
/// record carries one). Relative paths resolve against the CSV's directory.
void write_manifest_csv(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest_csv(const std::filesystem::path& path);

std::string file_checksum(const std::filesystem::path& path);
std::string record_checksum(const Manifest& manifest, const ManifestRecord& record);
void add_checksums(Manifest& manifest);
/// Ids whose stored checksum no longer matches the files.
std::vector<std::string> verify_checksums(const Manifest& manifest);

struct SplitSpec {
  enum class Mode { fraction, fixed_count };
  Mode mode = Mode::fraction;
  double train_fraction = 0.85;
  std::size_t train_count = 10;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded shuffle then partition: the first floor(n * train_fraction)
/// records train, the rest test. Fixed-count mode keeps that same test set
/// and trains on the first train_count records of the training part.
Split split_manifest(const Manifest& manifest, const SplitSpec& spec);

/// CSV `id,role` with role `train` or `test`.
void write_split_csv(const std::filesystem::path& path, const Split& split);
Split read_split_csv(const std::filesystem::path& path);

struct Sample {
  std::string id;
  Tensor image;                      // [1, H, W] in [0, 1]
  Tensor mask;                       // [3, H, W] one-hot
  std::vector<std::uint8_t> labels;  // H * W label map
};

/// Lung and heart masks (non-zero = member) merged into one label map.
/// Pixels claimed by both are labelled heart.
std::vector<std::uint8_t> merge_masks(const RawImage& lung, const RawImage& heart);
Tensor one_hot(const std::vector<std::uint8_t>& labels, std::size_t height, std::size_t width,
               std::size_t classes = 3);

Sample load_sample(const Manifest& manifest, const ManifestRecord& record,
                   const PreprocessConfig& config);
std::vector<Sample> load_samples(const Manifest& manifest, const std::vector<std::string>& ids,
                                 const PreprocessConfig& config);

// Synthetic chest-like images: two dark elliptical "lungs", a "heart" ellipse
// overlapping the lower medial lung region with only slightly more density
// than the mediastinum band behind it, curved ribs across the lung fields,
// random blobs, an intensity gradient and noise. 12-bit PGM images, 8-bit PNG
// masks.
struct SynthConfig {
  std::size_t count = 24;
  std::size_t size = 128;
  std::uint64_t seed = 0;
};

struct SynthSample {
  RawImage image;
  RawImage lung;
  RawImage heart;
};

SynthSample synthesize_sample(std::size_t index, std::size_t size, std::uint64_t seed);
/// Writes root/images/*.pgm and root/masks/{lung,heart}/*.png and returns the
/// manifest (also written to root/manifest.csv).
Manifest synthesize_dataset(const std::filesystem::path& root, const SynthConfig& config);

}  // namespace cxrseg
