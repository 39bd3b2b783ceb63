#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ledpose/pooling.hpp"

namespace ledpose {

struct LossConfig {
  double d_max = 5.0;        // meters; distance maps and labels live in [0, d_max]
  int led_count = 4;
  double disc_radius = 4.0;  // ground-truth disc radius, in map cells
  double bce_clamp = 1e-6;   // pooled LED probabilities clamped to [c, 1-c]
  bool heading_only = true;  // orientation loss covers yaw only

  void validate() const {
    if (!(d_max > 0)) throw ConfigError("loss: d_max must be positive");
    if (led_count < 1) throw ConfigError("loss: led_count must be >= 1");
    if (!(bce_clamp > 0 && bce_clamp < 0.5)) throw ConfigError("loss: bce_clamp must be in (0, 0.5)");
    if (disc_radius < 0) throw ConfigError("loss: disc_radius must be >= 0");
    if (!heading_only) throw ConfigError("loss: only heading-mode orientation is supported");
  }
};

namespace detail {

/// Shared pooling state for one position map, used by every loss. Inside the
/// losses the normalizer is sum + kPoolEps rather than the exact
/// normalization with uniform fallback: the fallback has zero gradient, so a
/// model whose position mass underflows would be permanently stuck, whereas
/// the stabilized form keeps a restoring gradient (~1/eps) that regrows the
/// mass. For any healthy map the two agree to a relative 1e-6.
template <class T>
struct PoolState {
  MapGrid<T> weights;
  T denom = 0;

  explicit PoolState(const MapGrid<T>& pos_pred) {
    T s = 0;
    for (const T& c : pos_pred.cells) {
      if (c < T(0)) throw std::domain_error("pooling weights: negative cell");
      s += c;
    }
    denom = s + static_cast<T>(kPoolEps);
    weights = MapGrid<T>(pos_pred.width, pos_pred.height);
    for (std::size_t k = 0; k < pos_pred.size(); ++k)
      weights.cells[k] = pos_pred.cells[k] / denom;
  }

  T pool(const MapGrid<T>& x) const { return pool_with_weights(x, weights); }

  /// d pool(X) / d pos_pred_k for live (attached) weights.
  void add_pool_grad(const MapGrid<T>& x, T pooled, T coeff, MapGrid<T>& d_pos) const {
    for (std::size_t k = 0; k < x.size(); ++k)
      d_pos.cells[k] += coeff * (x.cells[k] - pooled) / denom;
  }
};

}  // namespace detail

template <class T>
struct PosLoss {
  T value = 0;
  MapGrid<T> d_pos;  // gradients flow into the predicted position map
};

template <class T>
struct DistLoss {
  T value = 0;
  MapGrid<T> d_dist;  // no d_pos: pooling weights are detached here
};

template <class T>
struct OriLoss {
  T value = 0;
  MapGrid<T> d_sin, d_cos;  // no d_pos: pooling weights are detached here
};

template <class T>
struct LedLoss {
  T value = 0;
  std::vector<MapGrid<T>> d_led;
  MapGrid<T> d_pos;  // gradients DO flow through the position map here
};

template <class T>
struct TaskLoss {
  T value = 0;
  T pos = 0, dist = 0, ori = 0;
  MapGrid<T> d_pos, d_dist, d_sin, d_cos;
};

/// Position loss, 1 - pooled overlap with the binary ground-truth disc.
/// Zero only when all predicted mass lies inside the disc; one when all of
/// it lies outside. Gradients propagate into the position map through the
/// normalization.
template <class T>
inline PosLoss<T> loss_pos(const MapGrid<T>& pos_pred, const ImagePoint& uv,
                           const LossConfig& cfg, double stride) {
  const MapGrid<T> truth = ground_truth_position_map<T>(uv, cfg.disc_radius, pos_pred.width,
                                                        pos_pred.height, stride);
  detail::PoolState<T> st(pos_pred);
  const T overlap = st.pool(truth);
  PosLoss<T> out;
  out.value = T(1) - overlap;
  out.d_pos = MapGrid<T>(pos_pred.width, pos_pred.height);
  st.add_pool_grad(truth, overlap, T(-1), out.d_pos);
  return out;
}

/// Distance loss, squared error of the pooled distance against the label,
/// scaled by d_max^2 so the value stays in [0, 1]. The position map acts as
/// a constant set of weights: no gradient flows into it.
template <class T>
inline DistLoss<T> loss_dist(const MapGrid<T>& dist_map, const MapGrid<T>& pos_pred,
                             T dist_label, const LossConfig& cfg) {
  if (!(dist_label >= 0 && dist_label <= static_cast<T>(cfg.d_max)))
    throw std::domain_error("loss_dist: distance label outside [0, d_max]");
  detail::PoolState<T> st(pos_pred);
  const T pooled = st.pool(dist_map);
  const T scale = T(1) / static_cast<T>(cfg.d_max * cfg.d_max);
  DistLoss<T> out;
  const T err = pooled - dist_label;
  out.value = scale * err * err;
  out.d_dist = MapGrid<T>(dist_map.width, dist_map.height);
  const T coeff = scale * 2 * err;
  for (std::size_t k = 0; k < dist_map.size(); ++k)
    out.d_dist.cells[k] = coeff * st.weights.cells[k];
  return out;
}

/// Orientation loss on the heading's sine/cosine pair. As with the distance
/// loss, pooling weights are detached.
template <class T>
inline OriLoss<T> loss_ori(const MapGrid<T>& ori_sin, const MapGrid<T>& ori_cos,
                           const MapGrid<T>& pos_pred, T yaw_label, const LossConfig&) {
  detail::PoolState<T> st(pos_pred);
  const T ps = st.pool(ori_sin);
  const T pc = st.pool(ori_cos);
  const T es = ps - std::sin(yaw_label);
  const T ec = pc - std::cos(yaw_label);
  OriLoss<T> out;
  out.value = (es * es + ec * ec) / T(4);
  out.d_sin = MapGrid<T>(ori_sin.width, ori_sin.height);
  out.d_cos = MapGrid<T>(ori_cos.width, ori_cos.height);
  for (std::size_t k = 0; k < ori_sin.size(); ++k) {
    out.d_sin.cells[k] = es / T(2) * st.weights.cells[k];
    out.d_cos.cells[k] = ec / T(2) * st.weights.cells[k];
  }
  return out;
}

/// LED state loss: mean binary cross entropy of the pooled per-LED
/// probabilities. Gradients flow into every LED map and, unlike the other
/// losses, through the predicted position map as well — this is what lets
/// the pretext task shape the position map without pose labels.
template <class T>
inline LedLoss<T> loss_led(const std::vector<MapGrid<T>>& led_maps,
                           const MapGrid<T>& pos_pred,
                           const std::vector<bool>& led_labels, const LossConfig& cfg) {
  if (static_cast<int>(led_maps.size()) != cfg.led_count ||
      led_labels.size() != led_maps.size())
    throw std::domain_error("loss_led: LED map/label count mismatch with config");
  detail::PoolState<T> st(pos_pred);
  const T lo = static_cast<T>(cfg.bce_clamp);
  const T hi = T(1) - lo;
  LedLoss<T> out;
  out.d_pos = MapGrid<T>(pos_pred.width, pos_pred.height);
  out.d_led.reserve(led_maps.size());
  T total = 0;
  for (std::size_t i = 0; i < led_maps.size(); ++i) {
    const T raw = st.pool(led_maps[i]);
    const bool clamped = raw < lo || raw > hi;
    const T q = std::min(hi, std::max(lo, raw));
    const T label = led_labels[i] ? T(1) : T(0);
    total += -(label * std::log(q) + (T(1) - label) * std::log(T(1) - q));
    out.d_led.emplace_back(led_maps[i].width, led_maps[i].height);
    if (!clamped) {
      const T g = (q - label) / (q * (T(1) - q)) / static_cast<T>(cfg.led_count);
      for (std::size_t k = 0; k < led_maps[i].size(); ++k)
        out.d_led.back().cells[k] = g * st.weights.cells[k];
      st.add_pool_grad(led_maps[i], raw, g, out.d_pos);
    }
  }
  out.value = total / static_cast<T>(cfg.led_count);
  return out;
}

/// Pose task loss: mean of position, distance and orientation losses. The
/// position map receives gradients only through the position term, so its
/// gradient is not applied twice.
template <class T>
inline TaskLoss<T> loss_task(const OutputMaps<T>& maps, const ImagePoint& uv, T dist_label,
                             T yaw_label, const LossConfig& cfg, double stride) {
  PosLoss<T> lp = loss_pos(maps.pos, uv, cfg, stride);
  DistLoss<T> ld = loss_dist(maps.dist, maps.pos, dist_label, cfg);
  OriLoss<T> lo = loss_ori(maps.ori_sin, maps.ori_cos, maps.pos, yaw_label, cfg);
  TaskLoss<T> out;
  out.pos = lp.value;
  out.dist = ld.value;
  out.ori = lo.value;
  out.value = (lp.value + ld.value + lo.value) / T(3);
  out.d_pos = std::move(lp.d_pos);
  for (T& g : out.d_pos.cells) g /= T(3);
  out.d_dist = std::move(ld.d_dist);
  for (T& g : out.d_dist.cells) g /= T(3);
  out.d_sin = std::move(lo.d_sin);
  for (T& g : out.d_sin.cells) g /= T(3);
  out.d_cos = std::move(lo.d_cos);
  for (T& g : out.d_cos.cells) g /= T(3);
  return out;
}

}  // namespace ledpose
