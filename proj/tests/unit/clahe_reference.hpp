#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cxrseg/image.hpp"

namespace testsupport {

// Scalar CLAHE reference for a grid of tiles with one row, written directly
// from the definition: clip each tile histogram, spread the excess evenly,
// map through the scaled CDF, then blend the two horizontally nearest tile
// mappings by distance between tile centers.
cxrseg::RawImage clahe_reference(const cxrseg::RawImage& img, std::size_t tile_cols, double factor,
                         std::size_t bins) {
  const double maxv = img.max_value();
  const std::size_t levels = img.max_value() + 1;
  const std::size_t tw = img.width / tile_cols;
  std::vector<std::vector<double>> maps;
  std::vector<double> centers;
  for (std::size_t t = 0; t < tile_cols; ++t) {
    const std::size_t x0 = t * tw, x1 = t + 1 == tile_cols ? img.width : x0 + tw;
    centers.push_back((x0 + x1) / 2.0);
    std::vector<double> hist(bins, 0.0);
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = x0; x < x1; ++x) hist[img.at(y, x) * bins / levels] += 1;
    const double npix = static_cast<double>(img.height * (x1 - x0));
    if (std::isfinite(factor)) {
      const double limit = factor * npix / bins;
      double excess = 0;
      for (auto& h : hist) {
        excess += std::max(0.0, h - limit);
        h = std::min(h, limit);
      }
      for (auto& h : hist) h += excess / bins;
    }
    double total = 0;
    for (double h : hist) total += h;
    std::vector<double> map(bins);
    double run = 0;
    for (std::size_t b = 0; b < bins; ++b) map[b] = maxv * (run += hist[b]) / total;
    maps.push_back(map);
  }
  cxrseg::RawImage out(img.width, img.height, img.bit_depth);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t b = img.at(y, x) * bins / levels;
      const double px = x + 0.5;
      double v;
      if (px <= centers.front()) {
        v = maps.front()[b];
      } else if (px >= centers.back()) {
        v = maps.back()[b];
      } else {
        std::size_t t = 0;
        while (!(px >= centers[t] && px < centers[t + 1])) ++t;
        const double w = (px - centers[t]) / (centers[t + 1] - centers[t]);
        v = (1 - w) * maps[t][b] + w * maps[t + 1][b];
      }
      out.at(y, x) = static_cast<std::uint16_t>(std::clamp(std::floor(v + 0.5), 0.0, maxv));
    }
  return out;
}

}  // namespace testsupport
