#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace ledpose {

/// Dense w x h grid of scalar cells, row-major, index (i, j) = (row, col).
/// Row i runs down the image (v axis), column j runs across (u axis).
template <class T>
struct MapGrid {
  int width = 0;
  int height = 0;
  std::vector<T> cells;

  MapGrid() = default;
  MapGrid(int w, int h, T fill = T(0)) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int i, int j) { return cells[static_cast<std::size_t>(i) * width + j]; }
  const T& at(int i, int j) const { return cells[static_cast<std::size_t>(i) * width + j]; }

  std::size_t size() const { return cells.size(); }
  bool same_shape(const MapGrid& o) const { return width == o.width && height == o.height; }

  T min_value() const { return *std::min_element(cells.begin(), cells.end()); }
  T max_value() const { return *std::max_element(cells.begin(), cells.end()); }

  bool within(T lo, T hi) const {
    for (const T& c : cells)
      if (!(c >= lo && c <= hi)) return false;
    return true;
  }
};

/// The five per-cell map families the model emits for one image.
template <class T>
struct OutputMaps {
  MapGrid<T> pos;      // robot position likelihood, [0, 1]
  MapGrid<T> dist;     // distance estimate per cell, [0, d_max]
  MapGrid<T> ori_sin;  // sine of relative heading, [-1, 1]
  MapGrid<T> ori_cos;  // cosine of relative heading, [-1, 1]
  std::vector<MapGrid<T>> led;  // one state map per LED, [0, 1]
};

}  // namespace ledpose
