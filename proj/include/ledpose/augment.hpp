#pragma once

#include <optional>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "ledpose/geometry.hpp"
#include "ledpose/noise.hpp"

namespace ledpose {

struct AugmentPolicy {
  bool enabled = true;
  double translate_px = 64.0;  // uniform in +-translate_px, both axes
  double rotate_deg = 9.0;     // uniform in +-rotate_deg about image center
  double hue_shift = 6.0;      // OpenCV hue steps (180 = full circle)
  double brightness = 0.12;    // additive, fraction of full range
  double contrast = 0.15;      // multiplicative around mid-gray, +-
  double noise_amplitude = 0.06;  // additive fractal noise, fraction of range
  int noise_octaves = 4;
  int max_retries = 10;

  void validate() const {
    if (translate_px < 0 || rotate_deg < 0 || hue_shift < 0 || brightness < 0 ||
        contrast < 0 || noise_amplitude < 0)
      throw ConfigError("augment: ranges must be nonnegative");
    if (noise_octaves < 1 || noise_octaves > 8)
      throw ConfigError("augment: noise_octaves must be 1..8");
  }
};

struct AugmentResult {
  cv::Mat image;
  std::optional<ImagePoint> uv;
};

/// Label-consistent augmentation. The geometric part moves the uv label with
/// the image (rotation about the image center, then translation); heading,
/// distance and LED labels are unaffected by construction. Draws pushing a
/// visible robot's uv out of frame are rejected and resampled, falling back
/// to the identity transform after max_retries.
inline AugmentResult augment(const cv::Mat& image, const std::optional<ImagePoint>& uv,
                             const AugmentPolicy& policy, std::mt19937_64& rng) {
  AugmentResult out;
  if (!policy.enabled) {
    out.image = image.clone();
    out.uv = uv;
    return out;
  }
  const double W = image.cols, H = image.rows;
  const double cu = W / 2.0, cv_ = H / 2.0;

  std::uniform_real_distribution<double> dt(-policy.translate_px, policy.translate_px);
  std::uniform_real_distribution<double> dr(-deg2rad(policy.rotate_deg),
                                            deg2rad(policy.rotate_deg));
  double dx = 0, dy = 0, theta = 0;
  bool identity = false;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= policy.max_retries) {
      identity = true;
      break;
    }
    dx = dt(rng);
    dy = dt(rng);
    theta = dr(rng);
    if (!uv) break;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u2 = c * (uv->u - cu) - s * (uv->v - cv_) + cu + dx;
    const double v2 = s * (uv->u - cu) + c * (uv->v - cv_) + cv_ + dy;
    if (u2 >= 0 && u2 < W && v2 >= 0 && v2 < H) break;
  }
  if (identity) {
    dx = dy = theta = 0;
  }

  const double c = std::cos(theta), s = std::sin(theta);
  cv::Matx23d M(c, -s, cu - c * cu + s * cv_ + dx,
                s, c, cv_ - s * cu - c * cv_ + dy);
  const cv::Scalar fill = cv::mean(image);
  cv::warpAffine(image, out.image, M, image.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                 fill);
  if (uv) {
    out.uv = ImagePoint{c * (uv->u - cu) - s * (uv->v - cv_) + cu + dx,
                        s * (uv->u - cu) + c * (uv->v - cv_) + cv_ + dy};
  }

  // Photometric jitter: hue shift, then contrast and brightness.
  std::uniform_real_distribution<double> dh(-policy.hue_shift, policy.hue_shift);
  std::uniform_real_distribution<double> dc(1.0 - policy.contrast, 1.0 + policy.contrast);
  std::uniform_real_distribution<double> db(-policy.brightness, policy.brightness);
  const double hue = dh(rng), alpha = dc(rng), beta = db(rng) * 255.0;
  if (policy.hue_shift > 0) {
    cv::Mat hsv;
    cv::cvtColor(out.image, hsv, cv::COLOR_BGR2HSV);
    for (int y = 0; y < hsv.rows; ++y) {
      auto* row = hsv.ptr<cv::Vec3b>(y);
      for (int x = 0; x < hsv.cols; ++x) {
        int h = row[x][0] + static_cast<int>(std::lround(hue));
        row[x][0] = static_cast<uchar>(((h % 180) + 180) % 180);
      }
    }
    cv::cvtColor(hsv, out.image, cv::COLOR_HSV2BGR);
  }
  out.image.convertTo(out.image, -1, alpha, 128.0 * (1.0 - alpha) + beta);

  // Additive fractal noise, shared across channels like a lighting pattern.
  if (policy.noise_amplitude > 0) {
    std::uniform_int_distribution<std::uint64_t> dn;
    GradientNoise2D noise(dn(rng));
    std::uniform_real_distribution<double> doff(0.0, 64.0);
    const double ox = doff(rng), oy = doff(rng);
    const double amp = policy.noise_amplitude * 255.0;
    for (int y = 0; y < out.image.rows; ++y) {
      auto* row = out.image.ptr<cv::Vec3b>(y);
      for (int x = 0; x < out.image.cols; ++x) {
        const double n = amp * noise.fbm(x / 24.0 + ox, y / 24.0 + oy, policy.noise_octaves);
        for (int ch = 0; ch < 3; ++ch)
          row[x][ch] = cv::saturate_cast<uchar>(row[x][ch] + n);
      }
    }
  }
  return out;
}

}  // namespace ledpose
