#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "ledpose/checkpoint.hpp"
#include "ledpose/losses.hpp"
#include "ledpose/net.hpp"
#include "ledpose/optimizer.hpp"

using namespace ledpose;
using Catch::Approx;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = {2, 2, 2, 2, 2, 2, 2, 2};
  cfg.fuse_channels = 2;
  cfg.head_channels = 2;
  cfg.led_count = 1;
  return cfg;
}

template <class T>
Tensor3<T> random_image(std::mt19937_64& rng, int c, int h, int w, T lo = T(-1), T hi = T(1)) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor3<T> t(c, h, w);
  for (auto& v : t.data) v = static_cast<T>(d(rng));
  return t;
}

}  // namespace

TEST_CASE("forward produces 80x45 maps from a 640x360 image") {
  FcnNet<float> net(ModelConfig{}, 3);
  std::mt19937_64 rng(1);
  auto img = random_image<float>(rng, 3, 360, 640);
  auto maps = net.forward(img);
  CHECK(maps.pos.width == 80);
  CHECK(maps.pos.height == 45);
  CHECK(maps.dist.width == 80);
  CHECK(maps.led.size() == 4);
  CHECK(maps.led[0].height == 45);
}

TEST_CASE("forward rejects dimensions not divisible by the stride") {
  FcnNet<float> net(ModelConfig{}, 3);
  Tensor3<float> img(3, 180, 320);  // 180/8 is not an integer
  CHECK_THROWS_AS(net.forward(img), ConfigError);
}

TEST_CASE("output ranges hold even for adversarially scaled inputs") {
  FcnNet<float> net(ModelConfig{}, 5);
  std::mt19937_64 rng(2);
  for (double scale : {1.0, 1e3, 1e6}) {
    auto img = random_image<float>(rng, 3, 48, 64);
    for (auto& v : img.data) v *= static_cast<float>(scale);
    auto maps = net.forward(img);
    CHECK(maps.pos.within(0.0f, 1.0f));
    CHECK(maps.dist.within(0.0f, 5.0f));
    CHECK(maps.ori_sin.within(-1.0f, 1.0f));
    CHECK(maps.ori_cos.within(-1.0f, 1.0f));
    for (const auto& l : maps.led) CHECK(l.within(0.0f, 1.0f));
  }
}

TEST_CASE("parameter count is within 2x of the 380k reference backbone") {
  FcnNet<float> net(ModelConfig{}, 1);
  CHECK(net.param_count() >= 190000);
  CHECK(net.param_count() <= 760000);
}

TEST_CASE("receptive field covers at least 96 pixels") {
  CHECK(FcnNet<float>::receptive_field() >= 96);
}

TEST_CASE("analytic weight gradients match finite differences") {
  // Double-precision network on a tiny configuration; the scalar objective is
  // a fixed random weighting of every output cell.
  ModelConfig cfg = tiny_config();
  FcnNet<double> net(cfg, 11);
  std::mt19937_64 rng(13);
  auto img = random_image<double>(rng, 3, 16, 16);

  std::uniform_real_distribution<double> dw(-1.0, 1.0);
  auto weights_for = [&](int w, int h) {
    MapGrid<double> m(w, h);
    for (auto& c : m.cells) c = dw(rng);
    return m;
  };
  auto maps0 = net.forward(img);
  MapGrid<double> wp = weights_for(maps0.pos.width, maps0.pos.height);
  MapGrid<double> wd = weights_for(maps0.pos.width, maps0.pos.height);
  MapGrid<double> ws = weights_for(maps0.pos.width, maps0.pos.height);
  MapGrid<double> wc = weights_for(maps0.pos.width, maps0.pos.height);
  std::vector<MapGrid<double>> wl{weights_for(maps0.pos.width, maps0.pos.height)};

  auto objective = [&]() {
    auto maps = net.forward(img);
    double s = 0;
    for (std::size_t k = 0; k < wp.size(); ++k) {
      s += wp.cells[k] * maps.pos.cells[k];
      s += wd.cells[k] * maps.dist.cells[k];
      s += ws.cells[k] * maps.ori_sin.cells[k];
      s += wc.cells[k] * maps.ori_cos.cells[k];
      s += wl[0].cells[k] * maps.led[0].cells[k];
    }
    return s;
  };

  net.zero_grad();
  net.forward(img);
  net.backward(wp, wd, ws, wc, wl);
  auto params = net.params();

  const double h = 1e-6;
  int checked = 0;
  for (auto& p : params) {
    for (std::size_t j = 0; j < p.size; ++j) {
      const double saved = p.data[j];
      p.data[j] = saved + h;
      const double fp = objective();
      p.data[j] = saved - h;
      const double fm = objective();
      p.data[j] = saved;
      const double fd = (fp - fm) / (2 * h);
      const double got = p.grad[j];
      REQUIRE(std::abs(got - fd) <= std::max(1e-7, 1e-4 * std::abs(fd)));
      ++checked;
    }
  }
  CHECK(checked > 300);
}

namespace {

void stamp_blob(Tensor3<float>& im, int cx, int cy) {
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j)
      for (int c = 0; c < 3; ++c) im.at(c, cy + i, cx + j) = 1.0f;
}

std::pair<int, int> argmax_cell(const MapGrid<float>& m) {
  int bi = 0, bj = 0;
  float best = m.at(0, 0);
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < m.width; ++j)
      if (m.at(i, j) > best) {
        best = m.at(i, j);
        bi = i;
        bj = j;
      }
  return {bi, bj};
}

}  // namespace

TEST_CASE("a 16px shift moves interior map cells by exactly two cells") {
  // 16 pixels is one full cell at the deepest (/16) stage, so away from the
  // borders every map must shift rigidly, for any weights.
  FcnNet<float> net(ModelConfig{}, 9);
  Tensor3<float> img(3, 192, 256, -0.2f);
  stamp_blob(img, 120, 96);
  Tensor3<float> shifted(3, 192, 256, -0.2f);
  stamp_blob(shifted, 120 + 16, 96);
  auto m1 = net.forward(img);
  auto m2 = net.forward(shifted);
  for (int i = 8; i <= 15; ++i)
    for (int j = 10; j <= 23; ++j) {
      REQUIRE(m2.pos.at(i, j) == m1.pos.at(i, j - 2));
      REQUIRE(m2.dist.at(i, j) == m1.dist.at(i, j - 2));
      REQUIRE(m2.led[0].at(i, j) == m1.led[0].at(i, j - 2));
    }
}

TEST_CASE("shifting the input by one stride shifts the argmax cell") {
  // One-stride (8px) shifts are only half a cell at the deepest stage, so the
  // property is statistical and needs a position map that actually tracks the
  // object: train a small net briefly on the position loss first.
  ModelConfig cfg = tiny_config();
  cfg.channels = {4, 4, 4, 4, 4, 4, 4, 4};
  cfg.fuse_channels = 4;
  cfg.head_channels = 4;
  FcnNet<float> net(cfg, 17);
  AdamState<float> opt;
  opt.init(net.params());
  LossConfig lcfg;
  lcfg.disc_radius = 1.0;

  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> dx(16, 112), dy(16, 80);
  const int W = 128, H = 96;
  for (int step = 0; step < 1200; ++step) {
    const int bx = dx(rng), by = dy(rng);
    Tensor3<float> img(3, H, W, -0.2f);
    stamp_blob(img, bx, by);
    auto maps = net.forward(img);
    auto lp = loss_pos(maps.pos, ImagePoint{double(bx), double(by)}, lcfg, 8.0);
    net.zero_grad();
    MapGrid<float> zero(maps.pos.width, maps.pos.height);
    std::vector<MapGrid<float>> zled(1, zero);
    net.backward(lp.d_pos, zero, zero, zero, zled);
    opt.update(net.params(), step < 800 ? 3e-3 : 1e-3);
  }

  // Test at cell-centered positions: argmax is a mode estimate, and blobs
  // straddling a cell boundary make it a coin flip between two equal peaks.
  int hits = 0, trials = 0;
  std::uniform_int_distribution<int> tx(4, 11), ty(3, 8);
  for (int t = 0; t < 50; ++t) {
    const int bx = tx(rng) * 8 + 4, by = ty(rng) * 8 + 4;
    Tensor3<float> img(3, H, W, -0.2f);
    stamp_blob(img, bx, by);
    Tensor3<float> shifted(3, H, W, -0.2f);
    stamp_blob(shifted, bx + 8, by);
    auto p1 = argmax_cell(net.forward(img).pos);
    auto p2 = argmax_cell(net.forward(shifted).pos);
    ++trials;
    if (p2.first == p1.first && p2.second == p1.second + 1) ++hits;
  }
  INFO("hits " << hits << " of " << trials);
  CHECK(hits >= trials * 9 / 10);
}

TEST_CASE("checkpoint round trip preserves forward outputs bit-exactly") {
  FcnNet<float> net(ModelConfig{}, 21);
  std::mt19937_64 rng(22);
  auto img = random_image<float>(rng, 3, 48, 64);
  auto before = net.forward(img);

  const std::string path = "test_ckpt_roundtrip.bin";
  save_checkpoint(net, static_cast<const AdamState<float>*>(nullptr), 40, 777,
                  {{"strategy", "pretext"}}, path);
  auto loaded = load_checkpoint<float>(path);
  CHECK(loaded.epoch == 40);
  CHECK(loaded.seed == 777);
  CHECK(loaded.extra.at("strategy") == "pretext");
  auto after = loaded.net.forward(img);
  for (std::size_t k = 0; k < before.pos.size(); ++k) {
    REQUIRE(after.pos.cells[k] == before.pos.cells[k]);
    REQUIRE(after.dist.cells[k] == before.dist.cells[k]);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint load reports a missing file") {
  CHECK_THROWS_AS(load_checkpoint<float>("no_such_checkpoint.bin"), DataError);
}

TEST_CASE("checkpoint detects corruption") {
  FcnNet<float> net(tiny_config(), 31);
  const std::string path = "test_ckpt_corrupt.bin";
  save_checkpoint(net, static_cast<const AdamState<float>*>(nullptr), 1, 1, {}, path);
  {
    std::ofstream f(path, std::ios::binary | std::ios::in);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), DataError);
  std::remove(path.c_str());
}
