#pragma once

#include <cstddef>
#include <limits>

#include "cxrseg/image.hpp"
#include "cxrseg/tensor.hpp"

namespace cxrseg {

struct ClaheConfig {
  std::size_t tile_rows = 8;
  std::size_t tile_cols = 8;
  /// Clip limit as a multiple of the uniform bin height tile_pixels / bins.
  /// Infinity disables clipping (plain tiled adaptive equalization).
  double clip_limit_factor = 2.0;
  std::size_t num_bins = 256;

  void validate() const;
};

/// Bilinear resampling with the half-pixel-center convention; results are
/// rounded to the nearest integer. Keeps the bit depth.
RawImage resize_bilinear(const RawImage& img, std::size_t height, std::size_t width);

/// Nearest-neighbour resampling for label maps (labels are never blended).
RawImage resize_nearest_mask(const RawImage& mask, std::size_t height, std::size_t width);

/// Contrast limited adaptive histogram equalization.
///
/// The image is split into tile_rows x tile_cols tiles; the last row and
/// column of tiles absorb any remainder. Each tile histogram is clipped at
/// clip_limit_factor * tile_pixels / num_bins and the clipped excess is spread
/// evenly over all bins in a single pass. A tile's mapping is its normalized
/// CDF scaled to [0, max_value]. Output pixels blend the mappings of the (up
/// to) four nearest tile centers bilinearly; pixels outside the outermost
/// centers use two or one mapping.
RawImage clahe(const RawImage& img, const ClaheConfig& config);

/// pixel / (2^bit_depth - 1), as a [1, H, W] tensor.
Tensor normalize_to_unit(const RawImage& img);

struct PreprocessConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  bool clahe_enabled = true;
  ClaheConfig clahe;
};

/// resize -> CLAHE (when enabled) -> normalize.
Tensor preprocess_image(const RawImage& img, const PreprocessConfig& config);

}  // namespace cxrseg
