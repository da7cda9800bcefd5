#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "physgen/grid.hpp"

namespace physgen::io {

/// 16-bit binary PGM; image row i holds field row i. The scaling bounds go into a
/// comment line. A constant field maps to mid-scale.
void emit_field_image(const RowMatrix& field, const std::filesystem::path& path);

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> pixels;  // row-major
  double min = 0.0;
  double max = 0.0;
};

PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace physgen::io
