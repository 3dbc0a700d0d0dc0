#include "cxrseg/image.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "cxrseg/errors.hpp"

namespace cxrseg {

RawImage::RawImage(std::size_t w, std::size_t h, int depth, std::uint16_t fill)
    : width(w), height(h), bit_depth(depth), pixels(w * h, fill) {
  if (depth < 1 || depth > 16) throw UsageError("bit depth must be in [1, 16]");
}

void RawImage::validate() const {
  if (pixels.size() != width * height) throw DataError("image buffer does not match extents");
  const auto mx = max_value();
  for (auto p : pixels)
    if (p > mx)
      throw DataError("pixel value " + std::to_string(p) + " exceeds " +
                      std::to_string(bit_depth) + "-bit range");
}

namespace {

int depth_for_maxval(unsigned maxval) {
  int d = 1;
  while (d < 16 && (1u << d) - 1u < maxval) ++d;
  return d;
}

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RawImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    if (next_token(is) != "P5") throw DataError("not a binary PGM (P5)");
    const auto w = std::stoul(next_token(is));
    const auto h = std::stoul(next_token(is));
    const auto maxval = std::stoul(next_token(is));
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
      throw DataError("invalid PGM header");
    RawImage img(w, h, depth_for_maxval(static_cast<unsigned>(maxval)));
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(w * h * bpp);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw DataError("truncated PGM pixel data");
    for (std::size_t i = 0; i < w * h; ++i)
      img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                               : raw[i];
    for (auto p : img.pixels)
      if (p > maxval) throw DataError("PGM pixel exceeds maxval");
    return img;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
}

void write_pgm(const std::filesystem::path& path, const RawImage& img) {
  img.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  const auto maxval = img.max_value();
  os << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  for (auto p : img.pixels) {
    if (maxval > 255) os.put(static_cast<char>(p >> 8));
    os.put(static_cast<char>(p & 0xff));
  }
  if (!os) throw DataError("failed writing " + path.string());
}

RawImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  RawImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE &&
      color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": only grayscale or paletted PNGs are supported");
  }
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) {
    png_set_packing(png);  // one index or gray value per byte, not rescaled
  }
  if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = RawImage(w, h, depth == 16 ? 16 : (depth < 8 && color != PNG_COLOR_TYPE_PALETTE) ? depth : 8);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, rows[y] + 2 * x, 2);
        img.at(y, x) = v;
      } else {
        img.at(y, x) = rows[y][x];
      }
    }
  return img;
}

namespace {
void write_png_rows(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    int color_type, int depth, std::vector<png_bytep>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}
}  // namespace

void write_png(const std::filesystem::path& path, const RawImage& img) {
  img.validate();
  const bool wide = img.bit_depth > 8;
  const std::size_t bpp = wide ? 2 : 1;
  std::vector<unsigned char> buffer(img.width * img.height * bpp);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (wide)
      std::memcpy(buffer.data() + 2 * i, &img.pixels[i], 2);
    else
      buffer[i] = static_cast<unsigned char>(img.pixels[i]);
  }
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * img.width * bpp;
  write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, wide ? 16 : 8, rows);
}

void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3) throw UsageError("RGB buffer does not match extents");
  std::vector<std::uint8_t> copy = rgb;
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = copy.data() + y * width * 3;
  write_png_rows(path, width, height, PNG_COLOR_TYPE_RGB, 8, rows);
}

RawImage read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  throw DataError(path.string() + ": unsupported image format (expected .pgm or .png)");
}

}  // namespace cxrseg
