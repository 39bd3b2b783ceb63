#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ledpose/pooling.hpp"

using namespace ledpose;
using Catch::Approx;

namespace {

MapGrid<double> random_map(std::mt19937_64& rng, int w, int h, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  MapGrid<double> m(w, h);
  for (auto& c : m.cells) c = d(rng);
  return m;
}

}  // namespace

TEST_CASE("normalize_map spreads an all-ones map uniformly") {
  MapGrid<double> m(80, 45, 1.0);
  auto n = normalize_map(m);
  for (double c : n.cells) REQUIRE(c == Approx(1.0 / 3600.0));
}

TEST_CASE("normalize_map keeps a one-hot map unchanged") {
  MapGrid<double> m(8, 6);
  m.at(2, 3) = 1.0;
  auto n = normalize_map(m);
  CHECK(n.at(2, 3) == Approx(1.0));
  CHECK(n.at(0, 0) == 0.0);
}

TEST_CASE("normalize_map falls back to uniform on an all-zero map") {
  MapGrid<double> m(4, 3, 0.0);
  auto n = normalize_map(m);
  for (double c : n.cells) REQUIRE(c == Approx(1.0 / 12.0));
}

TEST_CASE("normalize_map rejects negative cells") {
  MapGrid<double> m(4, 3, 0.1);
  m.at(1, 1) = -0.01;
  CHECK_THROWS_AS(normalize_map(m), std::domain_error);
}

TEST_CASE("normalized maps sum to one") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto m = random_map(rng, 10, 7, 0.0, 2.0);
    auto n = normalize_map(m);
    double s = 0;
    for (double c : n.cells) s += c;
    REQUIRE(s == Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("pool of a constant map is that constant") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    auto p = random_map(rng, 9, 5, 0.0, 1.0);
    MapGrid<double> x(9, 5, 3.25);
    REQUIRE(pool(x, p) == Approx(3.25));
  }
}

TEST_CASE("pool worked example") {
  MapGrid<double> p(2, 2);
  p.at(0, 0) = 1;
  p.at(0, 1) = 1;
  MapGrid<double> x(2, 2);
  x.at(0, 0) = 2;
  x.at(0, 1) = 4;
  x.at(1, 0) = 6;
  x.at(1, 1) = 8;
  CHECK(pool(x, p) == Approx(3.0));
}

TEST_CASE("pool with a one-hot map selects one cell") {
  MapGrid<double> p(5, 4);
  p.at(3, 2) = 0.7;
  MapGrid<double> x(5, 4, 0.0);
  x.at(3, 2) = -1.5;
  CHECK(pool(x, p) == Approx(-1.5));
}

TEST_CASE("pool rejects mismatched shapes") {
  MapGrid<double> p(4, 4, 1.0), x(5, 4, 1.0);
  CHECK_THROWS_AS(pool(x, p), std::domain_error);
}

TEST_CASE("pool stays within the convex hull of the cells") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    auto p = random_map(rng, 8, 8, 0.0, 1.0);
    auto x = random_map(rng, 8, 8, -5.0, 5.0);
    double v = pool(x, p);
    REQUIRE(v >= x.min_value() - 1e-12);
    REQUIRE(v <= x.max_value() + 1e-12);
  }
}

TEST_CASE("pool is linear in the pooled map") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    auto p = random_map(rng, 6, 6, 0.01, 1.0);
    auto x = random_map(rng, 6, 6, -2.0, 2.0);
    auto y = random_map(rng, 6, 6, -2.0, 2.0);
    std::uniform_real_distribution<double> dc(-3.0, 3.0);
    double a = dc(rng), b = dc(rng);
    MapGrid<double> combo(6, 6);
    for (std::size_t k = 0; k < combo.size(); ++k)
      combo.cells[k] = a * x.cells[k] + b * y.cells[k];
    REQUIRE(pool(combo, p) == Approx(a * pool(x, p) + b * pool(y, p)).margin(1e-9));
  }
}

TEST_CASE("pool is invariant to positive rescaling of the weights") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    auto p = random_map(rng, 6, 6, 0.01, 1.0);
    auto x = random_map(rng, 6, 6, -2.0, 2.0);
    std::uniform_real_distribution<double> dc(1e-3, 100.0);
    double c = dc(rng);
    MapGrid<double> scaled = p;
    for (auto& w : scaled.cells) w *= c;
    REQUIRE(pool(x, scaled) == Approx(pool(x, p)).margin(1e-9));
  }
}

TEST_CASE("heading from constant maps") {
  MapGrid<double> p(4, 4, 1.0);
  MapGrid<double> s1(4, 4, 1.0), c0(4, 4, 0.0);
  CHECK(heading_from_maps(s1, c0, p) == Approx(kPi / 2));
  MapGrid<double> s0(4, 4, 0.0), c1(4, 4, 1.0);
  CHECK(heading_from_maps(s0, c1, p) == Approx(0.0).margin(1e-12));
  CHECK(heading_from_maps(s0, c0, p) == Approx(0.0).margin(1e-12));  // atan2(0,0)
}

TEST_CASE("heading pooled over two cells") {
  MapGrid<double> p(4, 2);
  p.at(0, 0) = 1.0;
  p.at(0, 1) = 1.0;
  MapGrid<double> s(4, 2, 0.0), c(4, 2, 0.0);
  s.at(0, 0) = 1.0;  // (sin, cos) = (1, 0) at the first cell
  c.at(0, 1) = 1.0;  // (sin, cos) = (0, 1) at the second
  CHECK(heading_from_maps(s, c, p) == Approx(kPi / 4));
}

TEST_CASE("ground truth disc with r=0 sets exactly the containing cell") {
  auto m = ground_truth_position_map<double>({13.0, 22.0}, 0.0, 16, 9, 8.0);
  int count = 0;
  for (double c : m.cells) count += (c != 0.0);
  CHECK(count == 1);
  CHECK(m.at(2, 1) == 1.0);  // cell (i=22/8, j=13/8)
}

namespace {

// Independent enumeration of the disc rule: center-to-center distance plus
// the always-set containing cell.
int brute_force_disc_count(const ImagePoint& uv, double r, int w, int h, double s,
                           const MapGrid<double>& m) {
  int count = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bool in = std::hypot((j + 0.5) - uv.u / s, (i + 0.5) - uv.v / s) <= r;
      bool containing = static_cast<int>(uv.u / s) == j && static_cast<int>(uv.v / s) == i;
      bool expect = in || containing;
      if (expect != (m.at(i, j) == 1.0)) return -1;  // mismatch
      count += expect;
    }
  return count;
}

}  // namespace

TEST_CASE("ground truth disc matches brute-force enumeration at the center") {
  ImagePoint uv{8.0 * 8, 4.5 * 8};  // center of a 16x9 map at stride 8
  auto m = ground_truth_position_map<double>(uv, 4.0, 16, 9, 8.0);
  int n = brute_force_disc_count(uv, 4.0, 16, 9, 8.0, m);
  REQUIRE(n > 0);
  // Interior disc of radius 4 clipped by the 9-row map; enumeration is the oracle.
  int ones = 0;
  for (double c : m.cells) ones += (c == 1.0);
  CHECK(ones == n);
}

TEST_CASE("ground truth disc clips at the image corner") {
  ImagePoint uv{1.0, 1.0};
  auto m = ground_truth_position_map<double>(uv, 4.0, 16, 9, 8.0);
  REQUIRE(brute_force_disc_count(uv, 4.0, 16, 9, 8.0, m) > 0);
  // Everything set must lie in the in-bounds quarter near the origin.
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 16; ++j)
      if (m.at(i, j) == 1.0) {
        REQUIRE(i <= 4);
        REQUIRE(j <= 4);
      }
}

TEST_CASE("ground truth disc equals brute force on random inputs") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> du(0.0, 16 * 8.0 - 1e-9), dv(0.0, 9 * 8.0 - 1e-9);
  std::uniform_real_distribution<double> dr(0.0, 6.0);
  for (int t = 0; t < 200; ++t) {
    ImagePoint uv{du(rng), dv(rng)};
    double r = dr(rng);
    auto m = ground_truth_position_map<double>(uv, r, 16, 9, 8.0);
    REQUIRE(brute_force_disc_count(uv, r, 16, 9, 8.0, m) >= 1);
    for (double c : m.cells) REQUIRE((c == 0.0 || c == 1.0));
  }
}

TEST_CASE("ground truth disc rejects out-of-bounds uv and negative radius") {
  CHECK_THROWS_AS(ground_truth_position_map<double>({-1.0, 0.0}, 1.0, 16, 9, 8.0),
                  std::domain_error);
  CHECK_THROWS_AS(ground_truth_position_map<double>({200.0, 0.0}, 1.0, 16, 9, 8.0),
                  std::domain_error);
  CHECK_THROWS_AS(ground_truth_position_map<double>({1.0, 1.0}, -0.5, 16, 9, 8.0),
                  std::domain_error);
}

TEST_CASE("extract_uv returns cell centers with row-major tie break") {
  MapGrid<double> m(80, 45);
  m.at(0, 0) = 1.0;
  auto p = extract_uv(m, 8.0);
  CHECK(p.u == Approx(4.0));
  CHECK(p.v == Approx(4.0));

  MapGrid<double> m2(80, 45);
  m2.at(44, 79) = 1.0;
  auto p2 = extract_uv(m2, 8.0);
  CHECK(p2.u == Approx(636.0));
  CHECK(p2.v == Approx(356.0));

  MapGrid<double> m3(80, 45);
  m3.at(0, 0) = 0.5;
  m3.at(0, 1) = 0.5;
  auto p3 = extract_uv(m3, 8.0);
  CHECK(p3.u == Approx(4.0));
  CHECK(p3.v == Approx(4.0));
}

TEST_CASE("extract_uv of a point disc stays within half a cell diagonal") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> du(0.0, 16 * 8.0 - 1e-9), dv(0.0, 9 * 8.0 - 1e-9);
  const double s = 8.0;
  for (int t = 0; t < 200; ++t) {
    ImagePoint uv{du(rng), dv(rng)};
    auto m = ground_truth_position_map<double>(uv, 0.0, 16, 9, s);
    auto got = extract_uv(m, s);
    REQUIRE(std::hypot(got.u - uv.u, got.v - uv.v) <= s / std::sqrt(2.0) + 1e-9);
  }
}
