#include "lamod/io/pgm.hpp"

#include <cmath>
#include <string>

#include "lamod/error.hpp"
#include "lamod/io/files.hpp"

namespace lamod::io {

std::vector<std::uint8_t> encode_pgm(std::span<const double> values, int height, int width, double lo, double hi) {
  if (height < 1 || width < 1) throw UsageError("pgm: dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw UsageError("pgm: value count does not match dimensions");
  }
  if (!(hi > lo)) throw UsageError("pgm: window must satisfy hi > lo");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + values.size());
  for (double v : values) {
    double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
    t = std::fmin(1.0, std::fmax(0.0, t));
    out.push_back(static_cast<std::uint8_t>(std::lround(t * 255.0)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, int height, int width, double lo,
               double hi) {
  write_atomic(path, encode_pgm(values, height, width, lo, hi));
}

}  // namespace lamod::io
