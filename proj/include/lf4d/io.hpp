#pragma once

// On-disk formats.
//
// LF4D light-field container (little-endian):
//   "LF4D" | u8 version = 1 | u32 c, S, T, Y, X | u8 dtype | values (c, s, t, y, x)
// dtype 1 = float32, 2 = float64.
//
// LF4P parameter bundle, same conventions:
//   "LF4P" | u8 version = 1 | u32 record count
//   name table: per record u32 byte length + UTF-8 name
//   records:    per record u8 rank | rank x u32 extents | u8 dtype | values

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lf4d/tensor.hpp"

namespace lf4d {

enum class DType : std::uint8_t { float32 = 1, float64 = 2 };

void write_lf4d(std::ostream& out, const LightField& field, DType dtype = DType::float64);
void write_lf4d(const std::filesystem::path& path, const LightField& field, DType dtype = DType::float64);
LightField read_lf4d(std::istream& in);
LightField read_lf4d(const std::filesystem::path& path);

// Directory of per-view 8-bit rasters named view_{s:02}_{t:02}.png, values
// scaled to [0, 1]. One channel is written as grayscale, three as RGB.
void write_views_png(const std::filesystem::path& dir, const LightField& field);
LightField read_views_png(const std::filesystem::path& dir);

struct ParamRecord {
  std::string name;
  std::vector<Index> shape;
  std::vector<double> values;
  DType dtype = DType::float64;
};

void write_param_bundle(std::ostream& out, std::span<const ParamRecord> records);
std::vector<ParamRecord> read_param_bundle(std::istream& in);

}  // namespace lf4d
