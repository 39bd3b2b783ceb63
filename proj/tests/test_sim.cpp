#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ledpose/datagen.hpp"

using namespace ledpose;
using Catch::Approx;

namespace {

SimConfig desk_config() {
  SimConfig cfg;
  cfg.image_width = 160;
  cfg.image_height = 96;
  return cfg;
}

}  // namespace

TEST_CASE("policy integrates straight-line motion") {
  SimConfig cfg = desk_config();
  WorldState w;
  w.observer.pose = {1.0, 2.0, 0.0};
  w.target.pose = {3.0, 3.0, kPi / 2};
  std::mt19937_64 rng(1);
  auto next = step_policy(w, cfg, 1.0, rng);
  CHECK(next.observer.pose.x == Approx(1.3));
  CHECK(next.observer.pose.y == Approx(2.0));
  CHECK(next.observer.pose.yaw == Approx(0.0));
  CHECK(next.target.pose.y == Approx(3.3));
  CHECK(next.time == Approx(1.0 / 1.0));
}

TEST_CASE("wall contact stops the robot and turns it by 90 +- 20 degrees") {
  SimConfig cfg = desk_config();
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    WorldState w;
    w.observer.pose = {3.7, 2.0, 0.0};  // heading straight at the x = 4 wall
    w.target.pose = {1.0, 1.0, kPi};
    auto next = step_policy(w, cfg, 1.0 / 3.0, rng);
    REQUIRE(next.observer.pose.x == Approx(3.7));  // did not advance
    const double turn = circular_distance(next.observer.pose.yaw, 0.0);
    REQUIRE(turn >= deg2rad(70.0) - 1e-9);
    REQUIRE(turn <= deg2rad(110.0) + 1e-9);
  }
}

TEST_CASE("robots approaching within half a meter both turn") {
  SimConfig cfg = desk_config();
  std::mt19937_64 rng(3);
  WorldState w;
  w.observer.pose = {2.0, 2.0, 0.0};          // heading +x toward the target
  w.target.pose = {2.45, 2.0, kPi};           // heading -x toward the observer
  auto next = step_policy(w, cfg, 1.0 / 3.0, rng);
  CHECK(next.observer.pose.x == Approx(2.0));
  CHECK(next.target.pose.x == Approx(2.45));
  CHECK(circular_distance(next.observer.pose.yaw, 0.0) >= deg2rad(70.0) - 1e-9);
  CHECK(circular_distance(next.target.pose.yaw, kPi) >= deg2rad(70.0) - 1e-9);
}

TEST_CASE("LED toggling happens exactly on period boundaries") {
  SimConfig cfg = desk_config();  // 3 fps, 5 s period -> every 15th frame
  WorldState w;
  std::mt19937_64 rng(5);
  w = toggle_leds(w, 0, cfg.fps, cfg.led_toggle_period, rng);
  auto after0 = w.target.leds;
  for (long f = 1; f < 15; ++f) {
    w = toggle_leds(w, f, cfg.fps, cfg.led_toggle_period, rng);
    REQUIRE(w.target.leds == after0);  // unchanged between boundaries
  }
  // Over many toggle events, each LED should be on about half the time.
  int on_counts[4] = {0, 0, 0, 0};
  const int kEvents = 10000;
  for (int e = 0; e < kEvents; ++e) {
    w = toggle_leds(w, 15L * e, cfg.fps, cfg.led_toggle_period, rng);
    for (int i = 0; i < 4; ++i) on_counts[i] += w.target.leds[i];
  }
  for (int i = 0; i < 4; ++i) {
    const double frac = static_cast<double>(on_counts[i]) / kEvents;
    REQUIRE(frac >= 0.47);
    REQUIRE(frac <= 0.53);
  }
}

TEST_CASE("policy keeps robots inside the arena over long rollouts") {
  SimConfig cfg = desk_config();
  std::mt19937_64 rng(7);
  WorldState w = init_world(cfg, rng);
  const double lo = cfg.robot_radius - 1e-6;
  const double hi = cfg.arena_side - cfg.robot_radius + 1e-6;
  for (int t = 0; t < 20000; ++t) {
    w = step_policy(w, cfg, 1.0 / cfg.fps, rng);
    REQUIRE(w.observer.pose.x >= lo);
    REQUIRE(w.observer.pose.x <= hi);
    REQUIRE(w.observer.pose.y >= lo);
    REQUIRE(w.observer.pose.y <= hi);
    REQUIRE(w.target.pose.x >= lo);
    REQUIRE(w.target.pose.x <= hi);
  }
}

TEST_CASE("labels agree with an independent geometric derivation") {
  SimConfig cfg = desk_config();
  Renderer r(cfg);
  std::mt19937_64 rng(11);
  WorldState w = init_world(cfg, rng);
  for (int t = 0; t < 500; ++t) {
    w = step_policy(w, cfg, 1.0 / cfg.fps, rng);
    auto s = r.labels(w);
    const double dx = w.target.pose.x - w.observer.pose.x;
    const double dy = w.target.pose.y - w.observer.pose.y;
    const double dz = cfg.ref_height - cfg.cam_height;
    REQUIRE(s.pose.distance() == Approx(std::sqrt(dx * dx + dy * dy + dz * dz)).margin(1e-9));
    REQUIRE(circular_distance(s.pose.yaw, w.target.pose.yaw - w.observer.pose.yaw -
                                              cfg.turret_yaw_offset) == Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("target behind the camera is invisible but still gets a pose label") {
  SimConfig cfg = desk_config();
  Renderer r(cfg);
  WorldState w;
  w.observer.pose = {2.0, 2.0, 0.0};
  w.target.pose = {1.0, 2.0, 0.0};  // directly behind the observer
  auto s = r.labels(w);
  CHECK_FALSE(s.visible);
  CHECK(s.pose.z == Approx(-1.0));
  for (bool v : s.led_visible) CHECK_FALSE(v);
}

TEST_CASE("a target facing the camera shows the front LED and hides the back one") {
  SimConfig cfg = desk_config();
  Renderer r(cfg);
  WorldState w;
  w.observer.pose = {1.0, 2.0, 0.0};
  w.target.pose = {3.0, 2.0, kPi};  // 2 m ahead, facing the observer
  auto s = r.labels(w);
  REQUIRE(s.visible);
  CHECK(circular_distance(s.pose.yaw, kPi) == Approx(0.0).margin(1e-12));
  CHECK(s.led_visible[kLedFront]);
  CHECK_FALSE(s.led_visible[kLedBack]);
}

TEST_CASE("LED visibility matches the face-normal predicate on random states") {
  SimConfig cfg = desk_config();
  Renderer r(cfg);
  std::mt19937_64 rng(13);
  WorldState w = init_world(cfg, rng);
  const double half_fov = deg2rad(cfg.hfov_deg) / 2;
  int visible_count = 0;
  for (int t = 0; t < 3000; ++t) {
    w = step_policy(w, cfg, 1.0 / cfg.fps, rng);
    auto s = r.labels(w);
    if (!s.visible) continue;
    ++visible_count;
    const double beta = std::atan2(s.pose.x, s.pose.z);
    const double psi = s.pose.yaw;
    if (s.led_visible[kLedFront]) REQUIRE(std::cos(psi + beta) < 0);
    if (s.led_visible[kLedBack]) REQUIRE(std::cos(psi + beta) > 0);
    if (s.led_visible[kLedTurretLeft]) REQUIRE(std::sin(psi + beta) > 0);
    if (s.led_visible[kLedTurretRight]) REQUIRE(std::sin(psi + beta) < 0);
    // Coarse cone version: heading within the safe cone pins front/back.
    // Beyond 1.5 m the LED offset from the body center adds at most ~8
    // degrees to the bearing, hence the slack term.
    const double slack = deg2rad(8.0);
    if (s.pose.distance() > 1.5) {
      if (std::abs(psi) < kPi / 2 - half_fov - slack) {
        REQUIRE_FALSE(s.led_visible[kLedFront]);
        REQUIRE(s.led_visible[kLedBack]);
      }
      if (std::abs(psi) > kPi / 2 + half_fov + slack) {
        REQUIRE_FALSE(s.led_visible[kLedBack]);
        REQUIRE(s.led_visible[kLedFront]);
      }
    }
  }
  REQUIRE(visible_count > 100);
}

TEST_CASE("rendered pixels place the robot at the projected label position") {
  SimConfig cfg = desk_config();
  Renderer r(cfg);
  WorldState w;
  w.observer.pose = {0.5, 2.0, 0.0};
  w.target.pose = {2.5, 2.0, kPi};  // facing the camera at 2 m
  w.target.leds = {true, false, false, false};
  std::mt19937_64 rng(17);
  auto s = r.render(w, rng);
  REQUIRE(s.visible);
  const ImagePoint uv = project<double>({s.pose.x, s.pose.y, s.pose.z}, cfg.camera());

  // The front LED is on: bright red pixels must appear near uv.
  bool found_led = false;
  cv::Mat& img = s.image;
  for (int y = std::max(0, int(uv.v) - 12); y < std::min(img.rows, int(uv.v) + 12); ++y)
    for (int x = std::max(0, int(uv.u) - 12); x < std::min(img.cols, int(uv.u) + 12); ++x) {
      const auto& px = img.at<cv::Vec3b>(y, x);
      if (px[2] > 200 && px[0] < 140 && px[1] < 140) found_led = true;
    }
  CHECK(found_led);

  // Turning the LED off must remove the bright red blob.
  w.target.leds = {false, false, false, false};
  std::mt19937_64 rng2(17);
  auto s2 = r.render(w, rng2);
  bool found_led2 = false;
  for (int y = std::max(0, int(uv.v) - 12); y < std::min(img.rows, int(uv.v) + 12); ++y)
    for (int x = std::max(0, int(uv.u) - 12); x < std::min(img.cols, int(uv.u) + 12); ++x) {
      const auto& px = s2.image.at<cv::Vec3b>(y, x);
      if (px[2] > 200 && px[0] < 140 && px[1] < 140) found_led2 = true;
    }
  CHECK_FALSE(found_led2);
}

TEST_CASE("dataset generation is deterministic and respects split contracts") {
  SimConfig cfg = desk_config();
  DatasetCounts counts{400, 40, 40};
  namespace fs = std::filesystem;
  const std::string dir1 = "test_ds_a", dir2 = "test_ds_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  auto st1 = generate_dataset(cfg, counts, 99, dir1);
  auto st2 = generate_dataset(cfg, counts, 99, dir2);
  CHECK(st1.fingerprint == st2.fingerprint);

  std::ifstream f1(fs::path(dir1) / "index.csv"), f2(fs::path(dir2) / "index.csv");
  std::string a((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(a == b);
  CHECK(a.find("unlabeled") != std::string::npos);

  CHECK(st1.total == 480);
  CHECK(st1.visible_fraction >= 0.10);
  CHECK(st1.visible_fraction <= 0.40);
  CHECK(st1.max_distance < 5.0);  // 4x4 arena with 0.25 m footprints

  // Different seed changes the fingerprint.
  fs::remove_all(dir2);
  auto st3 = generate_dataset(cfg, counts, 100, dir2);
  CHECK(st3.fingerprint != st1.fingerprint);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}
