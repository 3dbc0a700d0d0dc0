#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "cxrseg/tensor.hpp"

namespace cxrseg {

// Tensor snapshot layout, all little-endian:
//   "SGT1" | rank: u64 | extents: rank x u64 | values: numel x f64
inline constexpr char kSnapshotMagic[4] = {'S', 'G', 'T', '1'};

void write_snapshot(std::ostream& os, const Tensor& t);
Tensor read_snapshot(std::istream& is);

void save_snapshot(const std::filesystem::path& path, const Tensor& t);
Tensor load_snapshot(const std::filesystem::path& path);

/// Byte size of the snapshot encoding of a tensor with this shape.
std::uint64_t snapshot_size(const Shape& shape);

namespace io {
void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
}  // namespace io

}  // namespace cxrseg
