#include "cxrseg/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cxrseg/errors.hpp"

namespace cxrseg {

namespace io {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated snapshot stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

}  // namespace io

void write_snapshot(std::ostream& os, const Tensor& t) {
  os.write(kSnapshotMagic, 4);
  io::write_u64(os, t.rank());
  for (auto e : t.shape()) io::write_u64(os, e);
  for (double v : t.values()) io::write_f64(os, v);
  if (!os) throw DataError("failed writing tensor snapshot");
}

Tensor read_snapshot(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw DataError("not a tensor snapshot (bad magic)");
  const auto rank = io::read_u64(is);
  if (rank == 0 || rank > 8) throw DataError("tensor snapshot has implausible rank");
  Shape shape(rank);
  for (auto& e : shape) {
    e = io::read_u64(is);
    if (e == 0 || e > (1ULL << 32)) throw DataError("tensor snapshot has implausible extent");
  }
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = io::read_f64(is);
  return Tensor(std::move(shape), std::move(values));
}

void save_snapshot(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_snapshot(os, t);
}

Tensor load_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return read_snapshot(is);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::uint64_t snapshot_size(const Shape& shape) {
  return 4 + 8 + 8 * shape.size() + 8 * shape_numel(shape);
}

}  // namespace cxrseg
