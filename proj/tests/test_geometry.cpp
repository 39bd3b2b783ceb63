#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ledpose/geometry.hpp"

using namespace ledpose;
using Catch::Approx;

namespace {
const CameraIntrinsics kCam{100.0, 100.0, 320.0, 180.0, 640, 360};
}

TEST_CASE("project maps the optical axis to the principal point") {
  auto p = project<double>({0, 0, 2}, kCam);
  CHECK(p.u == Approx(320.0));
  CHECK(p.v == Approx(180.0));
}

TEST_CASE("project follows the pinhole formula") {
  auto p = project<double>({1, 0, 2}, kCam);
  CHECK(p.u == Approx(370.0));  // 320 + 100 * 1/2
  CHECK(p.v == Approx(180.0));
}

TEST_CASE("project rejects points behind the camera") {
  CHECK_THROWS_AS(project<double>({0, 0, -1}, kCam), std::domain_error);
  CHECK_THROWS_AS(project<double>({0.3, 0.1, 0}, kCam), std::domain_error);
}

TEST_CASE("reconstruct principal-point ray is the optical axis") {
  auto xyz = reconstruct<double>({320, 180}, 2.0, kCam);
  CHECK(xyz.x() == Approx(0.0).margin(1e-12));
  CHECK(xyz.y() == Approx(0.0).margin(1e-12));
  CHECK(xyz.z() == Approx(2.0));
}

TEST_CASE("reconstruct inverts project at range sqrt(5)") {
  auto xyz = reconstruct<double>({370, 180}, std::sqrt(5.0), kCam);
  CHECK(xyz.x() == Approx(1.0));
  CHECK(xyz.y() == Approx(0.0).margin(1e-12));
  CHECK(xyz.z() == Approx(2.0));
}

TEST_CASE("reconstruct rejects non-positive range") {
  CHECK_THROWS_AS(reconstruct<double>({320, 180}, 0.0, kCam), std::domain_error);
  CHECK_THROWS_AS(reconstruct<double>({320, 180}, -1.0, kCam), std::domain_error);
}

TEST_CASE("project/reconstruct round trip on random rays") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> du(0.0, 640.0), dv(0.0, 360.0), dd(1e-3, 5.0);
  for (int t = 0; t < 500; ++t) {
    ImagePoint uv{du(rng), dv(rng)};
    double d = dd(rng);
    auto xyz = reconstruct(uv, d, kCam);
    REQUIRE(xyz.norm() == Approx(d).epsilon(1e-9));
    auto back = project(xyz, kCam);
    REQUIRE(back.u == Approx(uv.u).epsilon(1e-6));
    REQUIRE(back.v == Approx(uv.v).epsilon(1e-6));
  }
}

TEST_CASE("circular distance handles the wrap at zero") {
  CHECK(circular_distance(deg2rad(10.0), deg2rad(350.0)) == Approx(deg2rad(20.0)));
  CHECK(circular_distance(kPi, -kPi) == Approx(0.0).margin(1e-12));
  CHECK(circular_distance(deg2rad(90.0), deg2rad(-90.0)) == Approx(kPi));
}

TEST_CASE("circular distance is symmetric and 2pi-periodic") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> da(-10.0, 10.0);
  std::uniform_int_distribution<int> dn(-3, 3);
  for (int t = 0; t < 200; ++t) {
    double a = da(rng), b = da(rng);
    int n = dn(rng);
    double d = circular_distance(a, b);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= kPi + 1e-12);
    REQUIRE(d == Approx(circular_distance(b, a)).margin(1e-12));
    REQUIRE(d == Approx(circular_distance(a + 2 * kPi * n, b)).margin(1e-9));
  }
}

TEST_CASE("relative pose of identical poses is the identity") {
  WorldPose p{1.3, 2.1, 0.7};
  auto rel = relative_pose(p, p);
  CHECK(rel.x == Approx(0.0).margin(1e-12));
  CHECK(rel.y == Approx(0.0).margin(1e-12));
  CHECK(rel.z == Approx(0.0).margin(1e-12));
  CHECK(rel.yaw == Approx(0.0).margin(1e-12));
}

TEST_CASE("target one meter ahead facing the observer") {
  WorldPose obs{0.5, 0.5, deg2rad(30.0)};
  WorldPose tgt{obs.x + std::cos(obs.yaw), obs.y + std::sin(obs.yaw),
                wrap_angle(obs.yaw + kPi)};
  auto rel = relative_pose(obs, tgt);
  CHECK(rel.z == Approx(1.0));
  CHECK(rel.x == Approx(0.0).margin(1e-12));
  CHECK(circular_distance(rel.yaw, kPi) == Approx(0.0).margin(1e-12));
}

TEST_CASE("relative pose is invariant under rigid world motions") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dp(-4.0, 4.0), da(-8.0, 8.0);
  for (int t = 0; t < 200; ++t) {
    WorldPose obs{dp(rng), dp(rng), da(rng)};
    WorldPose tgt{dp(rng), dp(rng), da(rng)};
    double offset = da(rng) * 0.1;
    auto rel = relative_pose(obs, tgt, offset, 0.07);

    // Rotate the whole world about an arbitrary pivot, then translate it.
    double alpha = da(rng), tx = dp(rng), ty = dp(rng);
    double ca = std::cos(alpha), sa = std::sin(alpha);
    auto moved = [&](const WorldPose& p) {
      return WorldPose{p.x * ca - p.y * sa + tx, p.x * sa + p.y * ca + ty,
                       p.yaw + alpha};
    };
    auto rel2 = relative_pose(moved(obs), moved(tgt), offset, 0.07);
    REQUIRE(rel2.x == Approx(rel.x).margin(1e-9));
    REQUIRE(rel2.y == Approx(rel.y).margin(1e-9));
    REQUIRE(rel2.z == Approx(rel.z).margin(1e-9));
    REQUIRE(circular_distance(rel2.yaw, rel.yaw) == Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("camera intrinsics validation") {
  CameraIntrinsics bad = kCam;
  bad.fx = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = kCam;
  bad.cx = 640;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(kCam.validate());
}
