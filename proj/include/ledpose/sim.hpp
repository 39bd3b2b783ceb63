#pragma once

#include <array>
#include <random>

#include "ledpose/geometry.hpp"

namespace ledpose {

/// LED index convention used everywhere: front, back, turret-left,
/// turret-right.
enum LedIndex { kLedFront = 0, kLedBack = 1, kLedTurretLeft = 2, kLedTurretRight = 3 };
inline constexpr int kNumLeds = 4;

struct SimConfig {
  double arena_side = 4.0;       // meters, square arena
  double robot_radius = 0.25;    // footprint circle
  double robot_speed = 0.3;      // m/s
  double fps = 3.0;
  double led_toggle_period = 5.0;  // seconds
  double turn_angle_deg = 90.0;
  double turn_jitter_deg = 20.0;
  double turret_yaw_offset = 0.0;  // radians, camera yaw relative to base

  int image_width = 160, image_height = 96;
  double hfov_deg = 75.0;
  int supersample = 2;
  double cam_height = 0.20;
  double ref_height = 0.13;  // target reference point used for pose labels

  // Target appearance.
  double body_length = 0.32, body_width = 0.24, body_height = 0.18;
  double turret_length = 0.14, turret_width = 0.12, turret_height = 0.08;
  double turret_forward_offset = 0.05;
  double led_radius = 0.042;

  std::string environment = "train";  // "train" or "heldout" texture pool

  CameraIntrinsics camera() const {
    CameraIntrinsics k;
    k.width = image_width;
    k.height = image_height;
    k.fx = k.fy = (image_width / 2.0) / std::tan(deg2rad(hfov_deg) / 2.0);
    k.cx = image_width / 2.0;
    k.cy = image_height / 2.0;
    return k;
  }

  void validate() const {
    if (!(arena_side > 4 * robot_radius)) throw ConfigError("sim: arena too small for robots");
    if (!(robot_speed > 0) || !(fps > 0) || !(led_toggle_period > 0))
      throw ConfigError("sim: speed, fps and led period must be positive");
    if (image_width % 8 != 0 || image_height % 8 != 0)
      throw ConfigError("sim: image dimensions must be divisible by 8");
    if (supersample < 1 || supersample > 4) throw ConfigError("sim: supersample must be 1..4");
    if (environment != "train" && environment != "heldout")
      throw ConfigError("sim: environment must be 'train' or 'heldout'");
    camera().validate();
  }
};

struct RobotState {
  WorldPose pose;
  std::array<bool, kNumLeds> leds{false, false, false, false};
};

/// Two robots in the arena; robot 0 observes, robot 1 is the target whose
/// LEDs are toggled and whose pose is labeled.
struct WorldState {
  RobotState observer;
  RobotState target;
  double time = 0.0;
};

inline WorldState init_world(const SimConfig& cfg, std::mt19937_64& rng) {
  const double r = cfg.robot_radius;
  std::uniform_real_distribution<double> dpos(r + 0.05, cfg.arena_side - r - 0.05);
  std::uniform_real_distribution<double> dyaw(-kPi, kPi);
  WorldState w;
  w.observer.pose = {dpos(rng), dpos(rng), dyaw(rng)};
  do {
    w.target.pose = {dpos(rng), dpos(rng), dyaw(rng)};
  } while (std::hypot(w.target.pose.x - w.observer.pose.x,
                      w.target.pose.y - w.observer.pose.y) < 3 * r);
  return w;
}

namespace detail {

inline bool blocked_at(const WorldPose& cand, const WorldPose& other, const SimConfig& cfg) {
  const double r = cfg.robot_radius;
  if (cand.x < r || cand.x > cfg.arena_side - r || cand.y < r || cand.y > cfg.arena_side - r)
    return true;
  return std::hypot(cand.x - other.x, cand.y - other.y) < 2 * r;
}

inline void advance_or_turn(WorldPose& pose, const WorldPose& other, const SimConfig& cfg,
                            double dt, std::mt19937_64& rng) {
  WorldPose cand = pose;
  cand.x += cfg.robot_speed * dt * std::cos(pose.yaw);
  cand.y += cfg.robot_speed * dt * std::sin(pose.yaw);
  if (!blocked_at(cand, other, cfg)) {
    pose = cand;
    return;
  }
  // Contact: stop and turn in place by ~90 degrees with uniform jitter,
  // direction chosen by fair coin.
  const double sign = (rng() & 1) ? 1.0 : -1.0;
  std::uniform_real_distribution<double> jitter(-cfg.turn_jitter_deg, cfg.turn_jitter_deg);
  pose.yaw = wrap_angle(pose.yaw + sign * deg2rad(cfg.turn_angle_deg + jitter(rng)));
}

}  // namespace detail

/// One step of the roaming policy: straight-line motion until wall or
/// robot-robot contact, then an in-place 90 +- U(-20, 20) degree turn.
inline WorldState step_policy(const WorldState& state, const SimConfig& cfg, double dt,
                              std::mt19937_64& rng) {
  if (!(dt > 0)) throw ConfigError("step_policy: dt must be positive");
  WorldState next = state;
  detail::advance_or_turn(next.observer.pose, next.target.pose, cfg, dt, rng);
  detail::advance_or_turn(next.target.pose, next.observer.pose, cfg, dt, rng);
  next.time = state.time + dt;
  return next;
}

/// Resample every target LED as a fair coin on toggle frames
/// (frame_index multiple of period*fps); unchanged otherwise.
inline WorldState toggle_leds(const WorldState& state, long frame_index, double fps,
                              double period, std::mt19937_64& rng) {
  if (!(fps > 0)) throw ConfigError("toggle_leds: fps must be positive");
  WorldState next = state;
  const long interval = std::max<long>(1, std::lround(period * fps));
  if (frame_index % interval == 0)
    for (int i = 0; i < kNumLeds; ++i) next.target.leds[i] = (rng() & 1) != 0;
  return next;
}

}  // namespace ledpose
