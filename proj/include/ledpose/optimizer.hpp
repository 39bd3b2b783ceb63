#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ledpose/net.hpp"

namespace ledpose {

/// Adam with bias correction; one (m, v) pair per parameter tensor, in the
/// order reported by FcnNet::params().
template <class T = float>
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m, v;

  void init(const std::vector<ParamView<T>>& params) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size, T(0));
      v.emplace_back(p.size, T(0));
    }
  }

  bool initialized() const { return !m.empty(); }

  void update(const std::vector<ParamView<T>>& params, double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      T* p = params[i].data;
      const T* g = params[i].grad;
      T* mi = m[i].data();
      T* vi = v[i].data();
      for (std::size_t j = 0; j < params[i].size; ++j) {
        const double gj = g[j];
        const double mn = beta1 * mi[j] + (1.0 - beta1) * gj;
        const double vn = beta2 * vi[j] + (1.0 - beta2) * gj * gj;
        mi[j] = static_cast<T>(mn);
        vi[j] = static_cast<T>(vn);
        p[j] -= static_cast<T>(lr * (mn / bc1) / (std::sqrt(vn / bc2) + eps));
      }
    }
  }
};

}  // namespace ledpose
