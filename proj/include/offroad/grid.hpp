#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "offroad/core.hpp"

namespace offroad {

// A raster layer: one value per cell of `spec`, row-major.
template <typename T>
struct Grid {
  GridSpec spec;
  std::vector<T> values;

  Grid() = default;
  explicit Grid(const GridSpec& s, T fill = T{}) : spec(s), values(s.cell_count(), fill) {}

  T& at(int ix, int iy) { return values[spec.index(ix, iy)]; }
  const T& at(int ix, int iy) const { return values[spec.index(ix, iy)]; }

  // Value of the cell containing `p`, or nullopt off-map.
  std::optional<T> sample(Vec2 p) const {
    const auto c = spec.cell_of(p);
    if (!c) return std::nullopt;
    return at(c->first, c->second);
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Layer = Grid<double>;
using BinaryLayer = Grid<std::uint8_t>;

}  // namespace offroad
