#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace ledpose {

/// CHW-packed dense tensor.
template <class T>
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_, T fill = T(0))
      : c(c_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  T* chan(int ci) { return data.data() + ci * plane(); }
  const T* chan(int ci) const { return data.data() + ci * plane(); }
  T& at(int ci, int i, int j) { return data[ci * plane() + static_cast<std::size_t>(i) * w + j]; }
  const T& at(int ci, int i, int j) const {
    return data[ci * plane() + static_cast<std::size_t>(i) * w + j];
  }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace ledpose
