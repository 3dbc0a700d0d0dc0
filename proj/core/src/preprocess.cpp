#include "cxrseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cxrseg/errors.hpp"

namespace cxrseg {

void ClaheConfig::validate() const {
  if (tile_rows < 1 || tile_cols < 1) throw ConfigError("clahe tile grid must be at least 1x1");
  if (!(clip_limit_factor >= 1.0)) throw ConfigError("clahe clip_limit_factor must be >= 1");
  if (num_bins < 2) throw ConfigError("clahe num_bins must be >= 2");
}

namespace {
void check_target(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw UsageError("resize target extents must be positive");
}

std::uint16_t round_clamp(double v, std::uint32_t max) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint16_t>(std::clamp(r, 0.0, static_cast<double>(max)));
}
}  // namespace

RawImage resize_bilinear(const RawImage& img, std::size_t height, std::size_t width) {
  check_target(height, width);
  if (img.width == 0 || img.height == 0) throw UsageError("cannot resize an empty image");
  if (height == img.height && width == img.width) return img;
  RawImage out(width, height, img.bit_depth);
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  const double ymax = static_cast<double>(img.height - 1), xmax = static_cast<double>(img.width - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, ymax);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, xmax);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
      const double bot = (1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
      out.at(y, x) = round_clamp((1 - wy) * top + wy * bot, img.max_value());
    }
  }
  return out;
}

RawImage resize_nearest_mask(const RawImage& mask, std::size_t height, std::size_t width) {
  check_target(height, width);
  if (mask.width == 0 || mask.height == 0) throw UsageError("cannot resize an empty mask");
  RawImage out(width, height, mask.bit_depth);
  for (std::size_t y = 0; y < height; ++y) {
    const auto sy = std::min(mask.height - 1, (2 * y + 1) * mask.height / (2 * height));
    for (std::size_t x = 0; x < width; ++x) {
      const auto sx = std::min(mask.width - 1, (2 * x + 1) * mask.width / (2 * width));
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLAHE

namespace {

struct TileAxis {
  std::vector<std::size_t> begin;  // first pixel of each tile, plus the end sentinel
  std::vector<double> center;      // continuous coordinate of each tile center

  TileAxis(std::size_t extent, std::size_t tiles) {
    const std::size_t size = extent / tiles;
    for (std::size_t t = 0; t < tiles; ++t) begin.push_back(t * size);
    begin.push_back(extent);
    for (std::size_t t = 0; t < tiles; ++t)
      center.push_back(0.5 * static_cast<double>(begin[t] + begin[t + 1]));
  }

  // Neighbouring tiles and the weight of the second one at pixel i.
  void locate(std::size_t i, std::size_t& t0, std::size_t& t1, double& w) const {
    const double p = static_cast<double>(i) + 0.5;
    const std::size_t last = center.size() - 1;
    if (p <= center.front()) {
      t0 = t1 = 0;
      w = 0.0;
      return;
    }
    if (p >= center.back()) {
      t0 = t1 = last;
      w = 0.0;
      return;
    }
    t0 = 0;
    while (t0 + 1 < last && center[t0 + 1] <= p) ++t0;
    t1 = t0 + 1;
    w = (p - center[t0]) / (center[t1] - center[t0]);
  }
};

}  // namespace

RawImage clahe(const RawImage& img, const ClaheConfig& config) {
  config.validate();
  if (img.height < config.tile_rows || img.width < config.tile_cols)
    throw UsageError("clahe: image " + std::to_string(img.height) + "x" +
                     std::to_string(img.width) + " is smaller than the tile grid");
  const std::uint32_t max = img.max_value();
  const std::size_t bins = config.num_bins;
  const std::uint64_t levels = std::uint64_t{max} + 1;
  auto bin_of = [&](std::uint16_t v) {
    return static_cast<std::size_t>(std::uint64_t{v} * bins / levels);
  };

  const TileAxis rows(img.height, config.tile_rows), cols(img.width, config.tile_cols);
  // mapping[(tr * tile_cols + tc) * bins + b]
  std::vector<double> mapping(config.tile_rows * config.tile_cols * bins);
  std::vector<double> hist(bins);
  for (std::size_t tr = 0; tr < config.tile_rows; ++tr) {
    for (std::size_t tc = 0; tc < config.tile_cols; ++tc) {
      std::fill(hist.begin(), hist.end(), 0.0);
      for (std::size_t y = rows.begin[tr]; y < rows.begin[tr + 1]; ++y)
        for (std::size_t x = cols.begin[tc]; x < cols.begin[tc + 1]; ++x)
          hist[bin_of(img.at(y, x))] += 1.0;
      const double pixels = static_cast<double>((rows.begin[tr + 1] - rows.begin[tr]) *
                                                (cols.begin[tc + 1] - cols.begin[tc]));
      if (std::isfinite(config.clip_limit_factor)) {
        const double limit = config.clip_limit_factor * pixels / static_cast<double>(bins);
        double excess = 0.0;
        for (auto& h : hist)
          if (h > limit) {
            excess += h - limit;
            h = limit;
          }
        const double share = excess / static_cast<double>(bins);
        for (auto& h : hist) h += share;
      }
      double* map = mapping.data() + (tr * config.tile_cols + tc) * bins;
      double cdf = 0.0, total = 0.0;
      for (double h : hist) total += h;
      for (std::size_t b = 0; b < bins; ++b) {
        cdf += hist[b];
        map[b] = static_cast<double>(max) * cdf / total;
      }
    }
  }

  RawImage out(img.width, img.height, img.bit_depth);
  auto map_at = [&](std::size_t tr, std::size_t tc, std::size_t b) {
    return mapping[(tr * config.tile_cols + tc) * bins + b];
  };
  for (std::size_t y = 0; y < img.height; ++y) {
    std::size_t r0, r1;
    double wy;
    rows.locate(y, r0, r1, wy);
    for (std::size_t x = 0; x < img.width; ++x) {
      std::size_t c0, c1;
      double wx;
      cols.locate(x, c0, c1, wx);
      const std::size_t b = bin_of(img.at(y, x));
      const double top = (1 - wx) * map_at(r0, c0, b) + wx * map_at(r0, c1, b);
      const double bot = (1 - wx) * map_at(r1, c0, b) + wx * map_at(r1, c1, b);
      out.at(y, x) = round_clamp((1 - wy) * top + wy * bot, max);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor normalize_to_unit(const RawImage& img) {
  Tensor t({1, img.height, img.width});
  auto v = t.values();
  const double scale = 1.0 / static_cast<double>(img.max_value());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) v[i] = img.pixels[i] * scale;
  return t;
}

Tensor preprocess_image(const RawImage& img, const PreprocessConfig& config) {
  RawImage resized = resize_bilinear(img, config.height, config.width);
  if (config.clahe_enabled) resized = clahe(resized, config.clahe);
  return normalize_to_unit(resized);
}

}  // namespace cxrseg
