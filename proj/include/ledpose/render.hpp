#pragma once

#include <array>
#include <random>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "ledpose/noise.hpp"
#include "ledpose/sim.hpp"

namespace ledpose {

struct RenderedSample {
  cv::Mat image;  // 8UC3 BGR
  bool visible = false;
  std::array<bool, kNumLeds> led_visible{false, false, false, false};
  RelativePose pose;
  std::array<bool, kNumLeds> led_state{false, false, false, false};
  long frame_index = 0;
};

namespace detail {

using Vec3 = Eigen::Vector3d;

struct CamFrame {
  Vec3 pos, fwd, right, down;
  double fx, fy, cx, cy;

  Vec3 to_cam(const Vec3& p) const {
    const Vec3 r = p - pos;
    return {r.dot(right), r.dot(down), r.dot(fwd)};
  }
};

inline cv::Scalar shade(const cv::Scalar& albedo, const Vec3& n, const Vec3& light,
                        double illum) {
  const double lambert = 0.55 + 0.45 * std::max(0.0, n.dot(light));
  return albedo * (lambert * illum);
}

/// Per-sample environment: texture seeds, palette, lighting. The heldout
/// pool uses a disjoint seed space and a different palette family so
/// "unseen environment" evaluations never share backgrounds with training.
struct Environment {
  GradientNoise2D floor_noise, wall_noise;
  cv::Vec3d floor_base, wall_base, ceil_base;
  double illum = 1.0;
  Vec3 light;
  struct Poster {
    int wall;
    double s0, s1, z0, z1;
    cv::Vec3d color;
  };
  std::vector<Poster> posters;

  Environment(std::uint64_t env_seed, bool heldout, double illum_draw, double arena_side)
      : floor_noise(env_seed * 2 + 1), wall_noise(env_seed * 2 + 2) {
    std::uint64_t s = env_seed;
    auto unit = [&s]() { return (splitmix64(s) >> 11) * 0x1.0p-53; };
    // Two palette families; the heldout family sits in a different hue range.
    auto pick = [&](double lo, double hi) { return lo + (hi - lo) * unit(); };
    if (!heldout) {
      floor_base = {pick(60, 110), pick(70, 120), pick(80, 130)};
      wall_base = {pick(120, 190), pick(130, 190), pick(125, 185)};
    } else {
      floor_base = {pick(40, 80), pick(90, 140), pick(110, 160)};
      wall_base = {pick(150, 200), pick(110, 160), pick(90, 140)};
    }
    ceil_base = wall_base * 0.55;
    illum = illum_draw;
    const double az = pick(0, 2 * kPi);
    light = Vec3(std::cos(az) * 0.5, std::sin(az) * 0.5, 0.84).normalized();
    const int n_posters = 2 + static_cast<int>(splitmix64(s) % 5);
    for (int i = 0; i < n_posters; ++i) {
      Poster p;
      p.wall = static_cast<int>(splitmix64(s) % 4);
      const double c = pick(0.4, arena_side - 0.4), hw = pick(0.15, 0.55);
      const double zc = pick(0.5, 1.7), hh = pick(0.1, 0.4);
      p.s0 = c - hw;
      p.s1 = c + hw;
      p.z0 = zc - hh;
      p.z1 = zc + hh;
      p.color = {pick(30, 230), pick(30, 230), pick(30, 230)};
      posters.push_back(p);
    }
  }

  cv::Vec3d floor_color(double x, double y) const {
    const double n = floor_noise.fbm(x * 1.7, y * 1.7, 3);
    const double patch = floor_noise.fbm(x * 0.5 + 31.0, y * 0.5 + 17.0, 2);
    cv::Vec3d c = floor_base * (1.0 + 0.22 * n);
    if (patch > 0.35) c *= 0.8;
    return c * illum;
  }

  cv::Vec3d wall_color(int wall, double s, double z) const {
    for (const auto& p : posters)
      if (p.wall == wall && s >= p.s0 && s <= p.s1 && z >= p.z0 && z <= p.z1)
        return p.color * (illum * (1.0 + 0.05 * wall_noise.at(s * 6, z * 6)));
    const double n = wall_noise.fbm(s * 1.3 + wall * 29.0, z * 1.3, 3);
    return wall_base * ((1.0 + 0.15 * n) * illum);
  }

  cv::Vec3d ceiling_color(double elev) const {
    return ceil_base * ((0.8 + 0.3 * elev) * illum);
  }
};

inline void fill_quad_aa(cv::Mat& img, const std::array<cv::Point2d, 4>& pts,
                         const cv::Scalar& color) {
  const int shift = 4;
  std::array<cv::Point, 4> fixed;
  for (int i = 0; i < 4; ++i)
    fixed[i] = {static_cast<int>(std::lround(pts[i].x * 16)),
                static_cast<int>(std::lround(pts[i].y * 16))};
  cv::fillConvexPoly(img, fixed.data(), 4, color, cv::LINE_AA, shift);
}

/// Axis-aligned (in body frame) box, rendered as its camera-facing faces.
inline void draw_box(cv::Mat& img, const CamFrame& cam, const Environment& env,
                     const Vec3& center, const Vec3& fwd, const Vec3& left, double lx,
                     double ly, double lz, const std::array<cv::Scalar, 6>& albedo) {
  const Vec3 up(0, 0, 1);
  const Vec3 ax = fwd * (lx / 2), ay = left * (ly / 2), az = up * (lz / 2);
  // Face order: +fwd, -fwd, +left, -left, +up, -up.
  const std::array<Vec3, 6> normals{fwd, -fwd, left, -left, up, -up};
  const std::array<Vec3, 6> face_centers{center + ax, center - ax, center + ay,
                                         center - ay, center + az, center - az};
  for (int f = 0; f < 6; ++f) {
    if (normals[f].dot(face_centers[f] - cam.pos) >= 0) continue;  // back-facing
    const Vec3 u = (f < 2) ? ay : (f < 4) ? az : ax;
    const Vec3 v = (f < 2) ? az : (f < 4) ? ax : ay;
    const std::array<Vec3, 4> corners{face_centers[f] + u + v, face_centers[f] + u - v,
                                      face_centers[f] - u - v, face_centers[f] - u + v};
    std::array<cv::Point2d, 4> pts;
    bool ok = true;
    for (int i = 0; i < 4; ++i) {
      const Vec3 pc = cam.to_cam(corners[i]);
      if (pc.z() < 0.05) {
        ok = false;
        break;
      }
      pts[i] = {cam.cx + cam.fx * pc.x() / pc.z(), cam.cy + cam.fy * pc.y() / pc.z()};
    }
    if (ok) fill_quad_aa(img, pts, shade(albedo[f], normals[f], env.light, env.illum));
  }
}

struct LedGeometry {
  Vec3 pos;
  Vec3 normal;
};

inline std::array<LedGeometry, kNumLeds> led_geometry(const SimConfig& cfg,
                                                      const WorldPose& target) {
  const Vec3 fwd(std::cos(target.yaw), std::sin(target.yaw), 0);
  const Vec3 left(-std::sin(target.yaw), std::cos(target.yaw), 0);
  const Vec3 base(target.x, target.y, 0);
  const double eps = 0.004;
  std::array<LedGeometry, kNumLeds> g;
  g[kLedFront] = {base + fwd * (cfg.body_length / 2 + eps) + Vec3(0, 0, 0.10), fwd};
  g[kLedBack] = {base - fwd * (cfg.body_length / 2 + eps) + Vec3(0, 0, 0.10), -fwd};
  const Vec3 turret_c = base + fwd * cfg.turret_forward_offset +
                        Vec3(0, 0, cfg.body_height + cfg.turret_height / 2);
  g[kLedTurretLeft] = {turret_c + left * (cfg.turret_width / 2 + eps), left};
  g[kLedTurretRight] = {turret_c - left * (cfg.turret_width / 2 + eps), -left};
  return g;
}

}  // namespace detail

/// Flat-shaded procedural renderer. Geometry (arena, walls, robot boxes, LED
/// discs) is consistent with the camera pose; textures, palette, posters and
/// global illumination are randomized per call through `rng`.
class Renderer {
 public:
  explicit Renderer(const SimConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  /// Analytic labels for the current state: relative pose, visibility
  /// (projected reference point in frame with positive depth) and per-LED
  /// visibility (outward normal facing the camera, given a visible robot).
  RenderedSample labels(const WorldState& state) const {
    const CameraIntrinsics k0 = cfg_.camera();
    RenderedSample out;
    out.led_state = state.target.leds;
    out.pose = relative_pose(state.observer.pose, state.target.pose, cfg_.turret_yaw_offset,
                             cfg_.cam_height - cfg_.ref_height);
    out.visible = false;
    if (out.pose.z > 0) {
      const ImagePoint uv = project<double>({out.pose.x, out.pose.y, out.pose.z}, k0);
      out.visible = uv.u >= 0 && uv.u < k0.width && uv.v >= 0 && uv.v < k0.height;
    }
    const detail::Vec3 cam_pos(state.observer.pose.x, state.observer.pose.y, cfg_.cam_height);
    const auto leds = detail::led_geometry(cfg_, state.target.pose);
    for (int i = 0; i < kNumLeds; ++i)
      out.led_visible[i] = out.visible && leds[i].normal.dot(leds[i].pos - cam_pos) < 0;
    return out;
  }

  /// Full render; `rng` draws the per-sample environment (texture seed,
  /// palette, posters, illumination). Train and heldout pools are disjoint.
  RenderedSample render(const WorldState& state, std::mt19937_64& rng) const {
    const bool heldout = cfg_.environment == "heldout";
    std::uniform_int_distribution<std::uint64_t> dseed(0, (1ULL << 31) - 1);
    const std::uint64_t env_seed = dseed(rng) + (heldout ? (1ULL << 31) : 0);
    std::uniform_real_distribution<double> dillum(0.55, 1.05);
    const double illum = dillum(rng);

    const CameraIntrinsics k0 = cfg_.camera();
    const int ss = cfg_.supersample;
    detail::CamFrame cam;
    const double chi = state.observer.pose.yaw + cfg_.turret_yaw_offset;
    cam.pos = {state.observer.pose.x, state.observer.pose.y, cfg_.cam_height};
    cam.fwd = {std::cos(chi), std::sin(chi), 0};
    cam.right = {std::sin(chi), -std::cos(chi), 0};
    cam.down = {0, 0, -1};
    cam.fx = k0.fx * ss;
    cam.fy = k0.fy * ss;
    cam.cx = k0.cx * ss;
    cam.cy = k0.cy * ss;

    RenderedSample out = labels(state);
    detail::Environment env(env_seed, heldout, illum, cfg_.arena_side);
    cv::Mat canvas(cfg_.image_height * ss, cfg_.image_width * ss, CV_8UC3);
    raycast_background(canvas, cam, env);
    draw_target(canvas, cam, env, state);
    if (ss > 1) {
      cv::resize(canvas, out.image, cv::Size(cfg_.image_width, cfg_.image_height), 0, 0,
                 cv::INTER_AREA);
    } else {
      out.image = canvas;
    }
    return out;
  }

  const SimConfig& config() const { return cfg_; }

 private:
  void raycast_background(cv::Mat& img, const detail::CamFrame& cam,
                          const detail::Environment& env) const {
    const double side = cfg_.arena_side;
    const double wall_h = 2.2;
    for (int py = 0; py < img.rows; ++py) {
      auto* row = img.ptr<cv::Vec3b>(py);
      for (int px = 0; px < img.cols; ++px) {
        const double dx = (px + 0.5 - cam.cx) / cam.fx;
        const double dy = (py + 0.5 - cam.cy) / cam.fy;
        const detail::Vec3 ray = cam.right * dx + cam.down * dy + cam.fwd;
        cv::Vec3d c;
        bool done = false;
        if (ray.z() < -1e-9) {
          const double t = cfg_.cam_height / -ray.z();
          const double hx = cam.pos.x() + t * ray.x();
          const double hy = cam.pos.y() + t * ray.y();
          if (hx > -0.02 && hx < side + 0.02 && hy > -0.02 && hy < side + 0.02) {
            c = env.floor_color(hx, hy);
            done = true;
          }
        }
        if (!done) {
          // Nearest wall plane hit within the wall band.
          double best_t = 1e18;
          int best_wall = -1;
          double best_s = 0, best_z = 0;
          auto consider = [&](int wall, double t, double s, double z) {
            if (t > 1e-6 && t < best_t && z >= -0.5 && z <= wall_h) {
              best_t = t;
              best_wall = wall;
              best_s = s;
              best_z = z;
            }
          };
          if (std::abs(ray.x()) > 1e-9) {
            double t = (0.0 - cam.pos.x()) / ray.x();
            consider(0, t, cam.pos.y() + t * ray.y(), cam.pos.z() + t * ray.z());
            t = (side - cam.pos.x()) / ray.x();
            consider(1, t, cam.pos.y() + t * ray.y(), cam.pos.z() + t * ray.z());
          }
          if (std::abs(ray.y()) > 1e-9) {
            double t = (0.0 - cam.pos.y()) / ray.y();
            consider(2, t, cam.pos.x() + t * ray.x(), cam.pos.z() + t * ray.z());
            t = (side - cam.pos.y()) / ray.y();
            consider(3, t, cam.pos.x() + t * ray.x(), cam.pos.z() + t * ray.z());
          }
          if (best_wall >= 0) {
            c = env.wall_color(best_wall, best_s, std::max(0.0, best_z));
          } else {
            c = env.ceiling_color(std::min(1.0, std::abs(ray.z())));
          }
        }
        row[px] = cv::Vec3b(cv::saturate_cast<uchar>(c[0]), cv::saturate_cast<uchar>(c[1]),
                            cv::saturate_cast<uchar>(c[2]));
      }
    }
  }

  void draw_target(cv::Mat& img, const detail::CamFrame& cam,
                   const detail::Environment& env, const WorldState& state) const {
    const WorldPose& t = state.target.pose;
    const detail::Vec3 rel = detail::Vec3(t.x, t.y, cfg_.ref_height) - cam.pos;
    if (rel.dot(cam.fwd) < 0.1) return;  // behind or on the camera plane

    const detail::Vec3 fwd(std::cos(t.yaw), std::sin(t.yaw), 0);
    const detail::Vec3 left(-std::sin(t.yaw), std::cos(t.yaw), 0);

    // Body: gray box with a distinct reddish front face and dark back face.
    const cv::Scalar side_col(115, 110, 105), top_col(135, 130, 124),
        front_col(70, 80, 170), back_col(56, 54, 52), bottom_col(40, 40, 40);
    detail::draw_box(img, cam, env, {t.x, t.y, cfg_.body_height / 2}, fwd, left,
                     cfg_.body_length, cfg_.body_width, cfg_.body_height,
                     {front_col, back_col, side_col, side_col, top_col, bottom_col});
    // Turret: tan box shifted toward the front.
    const cv::Scalar tur_side(88, 128, 152), tur_top(104, 148, 172);
    const detail::Vec3 tc = detail::Vec3(t.x, t.y, cfg_.body_height + cfg_.turret_height / 2) +
                            fwd * cfg_.turret_forward_offset;
    detail::draw_box(img, cam, env, tc, fwd, left, cfg_.turret_length, cfg_.turret_width,
                     cfg_.turret_height, {tur_side, tur_side, tur_side, tur_side, tur_top, tur_top});

    // LED discs: a saturated core with a soft bloom halo when on (cameras
    // overexpose LEDs heavily), a dark disc when off.
    const auto leds = detail::led_geometry(cfg_, t);
    for (int i = 0; i < kNumLeds; ++i) {
      if (leds[i].normal.dot(leds[i].pos - cam.pos) >= 0) continue;
      const detail::Vec3 pc = cam.to_cam(leds[i].pos);
      if (pc.z() < 0.05) continue;
      const double u = cam.cx + cam.fx * pc.x() / pc.z();
      const double v = cam.cy + cam.fy * pc.y() / pc.z();
      const double r = std::max(1.2, cfg_.led_radius * cam.fx / pc.z());
      const cv::Point center{static_cast<int>(std::lround(u * 16)),
                             static_cast<int>(std::lround(v * 16))};
      if (state.target.leds[i]) {
        blend_circle(img, center, 2.1 * r, cv::Scalar(60, 60, 255), 0.35);
        blend_circle(img, center, 1.4 * r, cv::Scalar(70, 70, 255), 0.75);
        cv::circle(img, center, static_cast<int>(std::lround(r * 16)),
                   cv::Scalar(160, 160, 255), cv::FILLED, cv::LINE_AA, 4);
      } else {
        cv::circle(img, center, static_cast<int>(std::lround(r * 16)),
                   cv::Scalar(34, 34, 40) * env.illum, cv::FILLED, cv::LINE_AA, 4);
      }
    }
  }

  static void blend_circle(cv::Mat& img, const cv::Point& center_fp, double radius_px,
                           const cv::Scalar& color, double alpha) {
    const int r = static_cast<int>(std::ceil(radius_px)) + 2;
    const cv::Point c(center_fp.x / 16, center_fp.y / 16);
    const cv::Rect roi = cv::Rect(c.x - r, c.y - r, 2 * r + 1, 2 * r + 1) &
                         cv::Rect(0, 0, img.cols, img.rows);
    if (roi.empty()) return;
    cv::Mat patch = img(roi).clone();
    cv::circle(patch, {center_fp.x - roi.x * 16, center_fp.y - roi.y * 16},
               static_cast<int>(std::lround(radius_px * 16)), color, cv::FILLED, cv::LINE_AA, 4);
    cv::addWeighted(patch, alpha, img(roi), 1.0 - alpha, 0.0, img(roi));
  }

  SimConfig cfg_;
};

}  // namespace ledpose
