#pragma once

#include <span>

#include "lamod/grid.hpp"

namespace lamod {

// out = IDFT(multipliers * DFT(in)) for a real H x W array with periodic
// boundary. `multipliers` holds one real value per frequency on the full
// H x W frequency grid (row-major, same indexing as the input) and must be
// symmetric under frequency negation. `in` and `out` may alias.
void fourier_multiply(std::span<const double> in, const Grid2& g, std::span<const double> multipliers,
                      std::span<double> out);

}  // namespace lamod
