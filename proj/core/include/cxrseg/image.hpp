#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace cxrseg {

/// Single-channel unsigned image, row-major.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 8;  // 1..16; every pixel is < 2^bit_depth
  std::vector<std::uint16_t> pixels;

  RawImage() = default;
  RawImage(std::size_t w, std::size_t h, int depth, std::uint16_t fill = 0);

  std::uint32_t max_value() const { return (1u << bit_depth) - 1u; }
  std::uint16_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::uint16_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  /// Throws DataError when a pixel exceeds max_value().
  void validate() const;
};

/// Binary PGM (P5), maxval up to 65535; bit depth is derived from maxval.
RawImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const RawImage& img);

/// Grayscale (8/16-bit) or paletted PNG. Palette images yield their raw
/// indices, which is how label masks are usually stored.
RawImage read_png(const std::filesystem::path& path);
/// Writes 8-bit or 16-bit grayscale depending on img.bit_depth.
void write_png(const std::filesystem::path& path, const RawImage& img);
/// Writes an 8-bit RGB image; `rgb` holds width*height*3 bytes.
void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb);

/// Dispatches on extension (.pgm / .png).
RawImage read_image(const std::filesystem::path& path);

}  // namespace cxrseg
