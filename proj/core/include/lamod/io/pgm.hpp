#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lamod::io {

// Binary (P5) 8-bit PGM. Values are mapped linearly from [lo, hi] to
// [0, 255] and clamped; non-finite values map to 0.
std::vector<std::uint8_t> encode_pgm(std::span<const double> values, int height, int width, double lo, double hi);
void write_pgm(const std::filesystem::path& path, std::span<const double> values, int height, int width, double lo,
               double hi);

}  // namespace lamod::io
