#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/io/image.hpp"

namespace physgen::io {

void emit_field_image(const RowMatrix& field, const std::filesystem::path& path) {
  require(field.size() > 0, "emit_field_image: empty field");
  require(field.allFinite(), "emit_field_image: field must be finite");
  const double lo = field.minCoeff(), hi = field.maxCoeff();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << "P5\n# bounds " << std::setprecision(17) << lo << ' ' << hi << '\n'
      << field.cols() << ' ' << field.rows() << "\n65535\n";
  for (Eigen::Index i = 0; i < field.rows(); ++i) {
    for (Eigen::Index j = 0; j < field.cols(); ++j) {
      const long v = hi > lo ? std::lround((field(i, j) - lo) / (hi - lo) * 65535.0) : 32768;
      const unsigned char bytes[2] = {static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  PgmImage img;
  std::string magic;
  in >> magic;
  if (magic != "P5") fail(ErrorCode::io, path.string() + " is not a binary PGM");
  // header tokens, with comment lines interleaved
  int values[3];
  for (int k = 0; k < 3;) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      std::istringstream ss(line);
      std::string hash, tag;
      ss >> hash >> tag;
      if (tag == "bounds") ss >> img.min >> img.max;
      continue;
    }
    if (!(in >> values[k++])) fail(ErrorCode::io, "malformed PGM header");
  }
  img.width = values[0], img.height = values[1], img.maxval = values[2];
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 255 || img.maxval > 65535)
    fail(ErrorCode::io, "unsupported PGM dimensions or depth");
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& p : img.pixels) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) fail(ErrorCode::io, "truncated PGM data");
    p = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  return img;
}

}  // namespace physgen::io
