#pragma once

#include <cmath>
#include <stdexcept>

#include "ledpose/geometry.hpp"
#include "ledpose/map_grid.hpp"

namespace ledpose {

/// Below this mass the predicted position map is treated as degenerate and
/// pooling falls back to uniform weights, keeping losses finite for an
/// untrained model.
inline constexpr double kPoolEps = 1e-6;

/// Normalize a nonnegative map so its cells sum to one. A map whose total
/// mass is under kPoolEps yields the uniform map.
template <class T>
inline MapGrid<T> normalize_map(const MapGrid<T>& m) {
  T sum = 0;
  for (const T& c : m.cells) {
    if (c < T(0)) throw std::domain_error("normalize_map: negative cell");
    sum += c;
  }
  MapGrid<T> out(m.width, m.height);
  if (sum < static_cast<T>(kPoolEps)) {
    const T u = T(1) / static_cast<T>(m.size());
    for (T& c : out.cells) c = u;
  } else {
    for (std::size_t k = 0; k < m.size(); ++k) out.cells[k] = m.cells[k] / sum;
  }
  return out;
}

/// Weighted sum of X's cells with an already-normalized weight map.
template <class T>
inline T pool_with_weights(const MapGrid<T>& x, const MapGrid<T>& weights) {
  if (!x.same_shape(weights)) throw std::domain_error("pool: map shapes differ");
  T acc = 0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += weights.cells[k] * x.cells[k];
  return acc;
}

/// Scalar extraction from a map: cells of X weighted by the normalized
/// predicted position map. The result is a convex combination of X's cells.
template <class T>
inline T pool(const MapGrid<T>& x, const MapGrid<T>& pos_pred) {
  if (!x.same_shape(pos_pred)) throw std::domain_error("pool: map shapes differ");
  return pool_with_weights(x, normalize_map(pos_pred));
}

/// Heading angle recovered from pooled sine/cosine maps, in (-pi, pi].
template <class T>
inline T heading_from_maps(const MapGrid<T>& ori_sin, const MapGrid<T>& ori_cos,
                           const MapGrid<T>& pos_pred) {
  const MapGrid<T> w = normalize_map(pos_pred);
  return std::atan2(pool_with_weights(ori_sin, w), pool_with_weights(ori_cos, w));
}

/// Binary ground-truth position map: cells whose centers lie within radius r
/// (in cells) of uv/stride are set to one; the disc is clipped at the map
/// borders. The cell containing uv is always set, which defines the r = 0
/// degenerate case.
template <class T>
inline MapGrid<T> ground_truth_position_map(const ImagePoint& uv, double r,
                                            int map_width, int map_height,
                                            double stride) {
  if (r < 0) throw std::domain_error("ground_truth_position_map: negative radius");
  if (uv.u < 0 || uv.v < 0 || uv.u >= map_width * stride || uv.v >= map_height * stride)
    throw std::domain_error("ground_truth_position_map: uv outside image bounds");
  MapGrid<T> out(map_width, map_height);
  const double cu = uv.u / stride;
  const double cv = uv.v / stride;
  for (int i = 0; i < map_height; ++i) {
    for (int j = 0; j < map_width; ++j) {
      const double dj = (j + 0.5) - cu;
      const double di = (i + 0.5) - cv;
      if (std::sqrt(di * di + dj * dj) <= r) out.at(i, j) = T(1);
    }
  }
  const int jc = std::min(map_width - 1, static_cast<int>(cu));
  const int ic = std::min(map_height - 1, static_cast<int>(cv));
  out.at(ic, jc) = T(1);
  return out;
}

/// Image-space center of the maximum cell; ties break toward the smallest
/// row, then smallest column. A soft-centroid alternative is provided below.
template <class T>
inline ImagePoint extract_uv(const MapGrid<T>& pos_pred, double stride) {
  int bi = 0, bj = 0;
  T best = pos_pred.at(0, 0);
  for (int i = 0; i < pos_pred.height; ++i)
    for (int j = 0; j < pos_pred.width; ++j)
      if (pos_pred.at(i, j) > best) {
        best = pos_pred.at(i, j);
        bi = i;
        bj = j;
      }
  return {(bj + 0.5) * stride, (bi + 0.5) * stride};
}

/// Mass-weighted centroid of the map, in image pixels.
template <class T>
inline ImagePoint extract_uv_centroid(const MapGrid<T>& pos_pred, double stride) {
  const MapGrid<T> w = normalize_map(pos_pred);
  double u = 0, v = 0;
  for (int i = 0; i < w.height; ++i)
    for (int j = 0; j < w.width; ++j) {
      u += w.at(i, j) * (j + 0.5);
      v += w.at(i, j) * (i + 0.5);
    }
  return {u * stride, v * stride};
}

}  // namespace ledpose
