#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "ledpose/common.hpp"
#include "ledpose/map_grid.hpp"
#include "ledpose/tensor.hpp"

namespace ledpose {

/// Fully convolutional trunk: four stride-2 stages (to /16) followed by a 2x
/// nearest upsample fused with the /8 skip, and 1x1 heads per map family.
struct ModelConfig {
  int in_channels = 3;
  int stride = 8;
  std::array<int, 8> channels{8, 8, 16, 16, 32, 32, 96, 144};
  int fuse_channels = 32;  // must match channels[5], the /8 skip width
  int head_channels = 64;
  int led_count = 4;
  double d_max = 5.0;

  void validate() const {
    if (stride != 8) throw ConfigError("model: only stride 8 is supported");
    if (fuse_channels != channels[5])
      throw ConfigError("model: fuse_channels must equal channels[5]");
    for (int c : channels)
      if (c < 1) throw ConfigError("model: channel widths must be positive");
    if (head_channels < 1 || led_count < 1 || in_channels < 1)
      throw ConfigError("model: invalid head/led/input configuration");
    if (!(d_max > 0)) throw ConfigError("model: d_max must be positive");
  }

  int head_maps() const { return 4 + led_count; }  // pos, dist, sin, cos, leds
};

namespace detail {

/// 2D convolution with square kernel (1 or 3), "same" padding and stride 1
/// or 2. Output spatial size is ceil(in/stride). Forward caches the im2col
/// buffer so backward only needs the weight matrix.
template <class T>
struct Conv2d {
  std::string name;
  int in_c = 0, out_c = 0, k = 3, stride = 1;
  std::vector<T> w, b, gw, gb;
  std::vector<T> col;  // cached [K x N] from the last forward
  int last_h = 0, last_w = 0, out_h = 0, out_w = 0;

  void configure(std::string n, int ic, int oc, int kk, int s) {
    name = std::move(n);
    in_c = ic;
    out_c = oc;
    k = kk;
    stride = s;
    w.assign(static_cast<std::size_t>(out_c) * in_c * k * k, T(0));
    b.assign(out_c, T(0));
    gw.assign(w.size(), T(0));
    gb.assign(b.size(), T(0));
  }

  void init_he(std::mt19937_64& rng) {
    const double std_dev = std::sqrt(2.0 / (in_c * k * k));
    std::normal_distribution<double> dist(0.0, std_dev);
    for (auto& x : w) x = static_cast<T>(dist(rng));
    std::fill(b.begin(), b.end(), T(0));
  }

  int pad() const { return k / 2; }
  std::size_t weight_rows() const { return out_c; }
  std::size_t weight_cols() const { return static_cast<std::size_t>(in_c) * k * k; }

  void im2col(const Tensor3<T>& x) {
    const int p = pad();
    out_h = (x.h + 2 * p - k) / stride + 1;
    out_w = (x.w + 2 * p - k) / stride + 1;
    last_h = x.h;
    last_w = x.w;
    const std::size_t K = weight_cols();
    const std::size_t N = static_cast<std::size_t>(out_h) * out_w;
    col.assign(K * N, T(0));
    std::size_t r = 0;
    for (int ci = 0; ci < in_c; ++ci) {
      const T* src = x.chan(ci);
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj, ++r) {
          T* dst = col.data() + r * N;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ki - p;
            if (iy < 0 || iy >= x.h) continue;
            const T* row = src + static_cast<std::size_t>(iy) * x.w;
            T* drow = dst + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride + kj - p;
              if (ix >= 0 && ix < x.w) drow[ox] = row[ix];
            }
          }
        }
    }
  }

  Tensor3<T> forward(const Tensor3<T>& x) {
    im2col(x);
    const std::size_t K = weight_cols();
    const std::size_t N = static_cast<std::size_t>(out_h) * out_w;
    Tensor3<T> y(out_c, out_h, out_w);
    Eigen::Map<const MatRM<T>> W(w.data(), out_c, K);
    Eigen::Map<const MatRM<T>> C(col.data(), K, N);
    Eigen::Map<MatRM<T>> Y(y.data.data(), out_c, N);
    Y.noalias() = W * C;
    for (int oc = 0; oc < out_c; ++oc) Y.row(oc).array() += b[oc];
    return y;
  }

  /// Accumulates weight gradients and returns the input gradient.
  Tensor3<T> backward(const Tensor3<T>& dy) {
    const std::size_t K = weight_cols();
    const std::size_t N = static_cast<std::size_t>(out_h) * out_w;
    Eigen::Map<const MatRM<T>> DY(dy.data.data(), out_c, N);
    Eigen::Map<const MatRM<T>> C(col.data(), K, N);
    Eigen::Map<const MatRM<T>> W(w.data(), out_c, K);
    Eigen::Map<MatRM<T>> GW(gw.data(), out_c, K);
    GW.noalias() += DY * C.transpose();
    for (int oc = 0; oc < out_c; ++oc) gb[oc] += DY.row(oc).sum();

    MatRM<T> dcol(K, N);
    dcol.noalias() = W.transpose() * DY;

    Tensor3<T> dx(in_c, last_h, last_w);
    const int p = pad();
    std::size_t r = 0;
    for (int ci = 0; ci < in_c; ++ci) {
      T* dst = dx.chan(ci);
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj, ++r) {
          const T* srow = dcol.data() + r * N;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ki - p;
            if (iy < 0 || iy >= last_h) continue;
            T* drow = dst + static_cast<std::size_t>(iy) * last_w;
            const T* sr = srow + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride + kj - p;
              if (ix >= 0 && ix < last_w) drow[ix] += sr[ox];
            }
          }
        }
    }
    return dx;
  }
};

template <class T>
inline void leaky_relu_inplace(Tensor3<T>& t, T alpha) {
  for (T& v : t.data) v = v > T(0) ? v : alpha * v;
}

/// Backward through leaky relu using the activated values (the sign of the
/// output equals the sign of the pre-activation).
template <class T>
inline void leaky_relu_backward_inplace(Tensor3<T>& grad, const Tensor3<T>& activated,
                                        T alpha) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activated.data[i] > T(0))) grad.data[i] *= alpha;
}

}  // namespace detail

/// Named view over one parameter tensor, used by the optimizer and the
/// checkpoint container.
template <class T>
struct ParamView {
  std::string name;
  T* data = nullptr;
  T* grad = nullptr;
  std::size_t size = 0;
};

template <class T = float>
class FcnNet {
 public:
  static constexpr T kLeak = T(0.1);

  explicit FcnNet(const ModelConfig& cfg, std::uint64_t init_seed = 1) : cfg_(cfg) {
    cfg_.validate();
    const auto& ch = cfg_.channels;
    enc_[0].configure("enc0", cfg_.in_channels, ch[0], 3, 2);
    enc_[1].configure("enc1", ch[0], ch[1], 3, 1);
    enc_[2].configure("enc2", ch[1], ch[2], 3, 2);
    enc_[3].configure("enc3", ch[2], ch[3], 3, 1);
    enc_[4].configure("enc4", ch[3], ch[4], 3, 2);
    enc_[5].configure("enc5", ch[4], ch[5], 3, 1);
    enc_[6].configure("enc6", ch[5], ch[6], 3, 2);
    enc_[7].configure("enc7", ch[6], ch[7], 3, 1);
    proj_.configure("fuse_proj", ch[7], cfg_.fuse_channels, 1, 1);
    head_trunk_.configure("head_trunk", cfg_.fuse_channels, cfg_.head_channels, 3, 1);
    head_out_.configure("head_out", cfg_.head_channels, cfg_.head_maps(), 1, 1);
    auto rng = make_rng(init_seed, 0x6e657477ULL);
    for (auto* c : layers()) c->init_he(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* c : const_cast<FcnNet*>(this)->layers()) n += c->w.size() + c->b.size();
    return n;
  }

  /// Theoretical receptive field of one output cell, in input pixels.
  static int receptive_field() {
    int rf = 1, jump = 1;
    auto conv = [&](int k, int s) {
      rf += (k - 1) * jump;
      jump *= s;
    };
    for (int i = 0; i < 4; ++i) {
      conv(3, 2);
      conv(3, 1);
    }
    jump /= 2;    // nearest upsample back to /8
    conv(3, 1);   // head trunk
    return rf;
  }

  /// Run the network. Image dimensions must be divisible by the stride.
  OutputMaps<T> forward(const Tensor3<T>& image) {
    if (image.c != cfg_.in_channels) throw ConfigError("forward: channel count mismatch");
    if (image.h % cfg_.stride != 0 || image.w % cfg_.stride != 0)
      throw ConfigError("forward: image dimensions must be divisible by the stride");
    const int mh = image.h / cfg_.stride;
    const int mw = image.w / cfg_.stride;

    const Tensor3<T>* prev = &image;
    for (int i = 0; i < 8; ++i) {
      act_[i] = enc_[i].forward(*prev);
      detail::leaky_relu_inplace(act_[i], kLeak);
      prev = &act_[i];
    }
    proj_out_ = proj_.forward(act_[7]);

    // Nearest 2x upsample, cropped to the /8 grid.
    fused_ = Tensor3<T>(cfg_.fuse_channels, mh, mw);
    for (int ci = 0; ci < cfg_.fuse_channels; ++ci)
      for (int i = 0; i < mh; ++i)
        for (int j = 0; j < mw; ++j)
          fused_.at(ci, i, j) = proj_out_.at(ci, i / 2, j / 2) + act_[5].at(ci, i, j);
    detail::leaky_relu_inplace(fused_, kLeak);

    trunk_out_ = head_trunk_.forward(fused_);
    detail::leaky_relu_inplace(trunk_out_, kLeak);
    head_ = head_out_.forward(trunk_out_);

    maps_ = OutputMaps<T>{};
    maps_.pos = head_map_sigmoid(0, T(1));
    maps_.dist = head_map_sigmoid(1, static_cast<T>(cfg_.d_max));
    maps_.ori_sin = head_map_tanh(2);
    maps_.ori_cos = head_map_tanh(3);
    maps_.led.clear();
    for (int i = 0; i < cfg_.led_count; ++i) maps_.led.push_back(head_map_sigmoid(4 + i, T(1)));
    return maps_;
  }

  /// Backpropagate map gradients from the losses into the weight gradients.
  /// Uses the caches of the immediately preceding forward call.
  void backward(const MapGrid<T>& d_pos, const MapGrid<T>& d_dist, const MapGrid<T>& d_sin,
                const MapGrid<T>& d_cos, const std::vector<MapGrid<T>>& d_led) {
    Tensor3<T> dhead(head_.c, head_.h, head_.w);
    add_sigmoid_grad(dhead, 0, d_pos, maps_.pos, T(1));
    add_sigmoid_grad(dhead, 1, d_dist, maps_.dist, static_cast<T>(cfg_.d_max));
    add_tanh_grad(dhead, 2, d_sin, maps_.ori_sin);
    add_tanh_grad(dhead, 3, d_cos, maps_.ori_cos);
    for (std::size_t i = 0; i < d_led.size(); ++i)
      add_sigmoid_grad(dhead, 4 + static_cast<int>(i), d_led[i], maps_.led[i], T(1));

    Tensor3<T> da_t = head_out_.backward(dhead);
    detail::leaky_relu_backward_inplace(da_t, trunk_out_, kLeak);
    Tensor3<T> dfused = head_trunk_.backward(da_t);
    detail::leaky_relu_backward_inplace(dfused, fused_, kLeak);

    // Split the fused gradient into the upsample branch and the skip branch.
    Tensor3<T> dproj(proj_out_.c, proj_out_.h, proj_out_.w);
    for (int ci = 0; ci < dfused.c; ++ci)
      for (int i = 0; i < dfused.h; ++i)
        for (int j = 0; j < dfused.w; ++j)
          dproj.at(ci, i / 2, j / 2) += dfused.at(ci, i, j);

    Tensor3<T> da7 = proj_.backward(dproj);
    detail::leaky_relu_backward_inplace(da7, act_[7], kLeak);
    Tensor3<T> d = enc_[7].backward(da7);
    detail::leaky_relu_backward_inplace(d, act_[6], kLeak);
    d = enc_[6].backward(d);
    // Skip contribution joins the gradient at the /8 stage output.
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dfused.data[i];
    for (int stage = 5; stage >= 0; --stage) {
      detail::leaky_relu_backward_inplace(d, act_[stage], kLeak);
      d = enc_[stage].backward(d);
    }
  }

  void zero_grad() {
    for (auto* c : layers()) {
      std::fill(c->gw.begin(), c->gw.end(), T(0));
      std::fill(c->gb.begin(), c->gb.end(), T(0));
    }
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    for (auto* c : layers()) {
      out.push_back({c->name + ".w", c->w.data(), c->gw.data(), c->w.size()});
      out.push_back({c->name + ".b", c->b.data(), c->gb.data(), c->b.size()});
    }
    return out;
  }

 private:
  std::array<detail::Conv2d<T>*, 11> layers() {
    return {&enc_[0], &enc_[1], &enc_[2], &enc_[3], &enc_[4], &enc_[5], &enc_[6], &enc_[7],
            &proj_, &head_trunk_, &head_out_};
  }

  MapGrid<T> head_map_sigmoid(int chan, T scale) {
    MapGrid<T> m(head_.w, head_.h);
    const T* src = head_.chan(chan);
    for (std::size_t k = 0; k < m.size(); ++k)
      m.cells[k] = scale / (T(1) + std::exp(-src[k]));
    return m;
  }

  MapGrid<T> head_map_tanh(int chan) {
    MapGrid<T> m(head_.w, head_.h);
    const T* src = head_.chan(chan);
    for (std::size_t k = 0; k < m.size(); ++k) m.cells[k] = std::tanh(src[k]);
    return m;
  }

  void add_sigmoid_grad(Tensor3<T>& dhead, int chan, const MapGrid<T>& dmap,
                        const MapGrid<T>& value, T scale) {
    T* dst = dhead.chan(chan);
    for (std::size_t k = 0; k < dmap.size(); ++k) {
      const T s = value.cells[k] / scale;  // sigmoid output
      dst[k] += dmap.cells[k] * scale * s * (T(1) - s);
    }
  }

  void add_tanh_grad(Tensor3<T>& dhead, int chan, const MapGrid<T>& dmap,
                     const MapGrid<T>& value) {
    T* dst = dhead.chan(chan);
    for (std::size_t k = 0; k < dmap.size(); ++k)
      dst[k] += dmap.cells[k] * (T(1) - value.cells[k] * value.cells[k]);
  }

  ModelConfig cfg_;
  std::array<detail::Conv2d<T>, 8> enc_;
  detail::Conv2d<T> proj_, head_trunk_, head_out_;

  // Forward caches for backprop.
  std::array<Tensor3<T>, 8> act_;
  Tensor3<T> proj_out_, fused_, trunk_out_, head_;
  OutputMaps<T> maps_;
};

}  // namespace ledpose
