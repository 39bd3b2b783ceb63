#pragma once

#include <cmath>
#include <cstdint>

#include "ledpose/common.hpp"

namespace ledpose {

/// Seeded 2D gradient noise on the integer lattice with quintic fade,
/// plus a fractal (octave) accumulator. Output roughly in [-1, 1].
class GradientNoise2D {
 public:
  explicit GradientNoise2D(std::uint64_t seed) : seed_(seed) {}

  double at(double x, double y) const {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const double u = fade(fx), v = fade(fy);
    const double n00 = dot_grad(x0, y0, fx, fy);
    const double n10 = dot_grad(x0 + 1, y0, fx - 1, fy);
    const double n01 = dot_grad(x0, y0 + 1, fx, fy - 1);
    const double n11 = dot_grad(x0 + 1, y0 + 1, fx - 1, fy - 1);
    const double nx0 = n00 + u * (n10 - n00);
    const double nx1 = n01 + u * (n11 - n01);
    return 1.5 * (nx0 + v * (nx1 - nx0));
  }

  double fbm(double x, double y, int octaves, double gain = 0.5) const {
    double amp = 1.0, sum = 0.0, norm = 0.0;
    for (int o = 0; o < octaves; ++o) {
      sum += amp * at(x, y);
      norm += amp;
      amp *= gain;
      x = x * 2.0 + 13.7;
      y = y * 2.0 + 7.3;
    }
    return sum / norm;
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

  double dot_grad(int ix, int iy, double dx, double dy) const {
    std::uint64_t h = seed_;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) * 0xc2b2ae3d27d4eb4fULL;
    h = splitmix64(h);
    static const double gx[8] = {1, -1, 1, -1, 0.7071, -0.7071, 0.7071, -0.7071};
    static const double gy[8] = {0.7071, 0.7071, -0.7071, -0.7071, 1, 1, -1, -1};
    const int g = static_cast<int>(h & 7);
    return gx[g] * dx + gy[g] * dy;
  }

  std::uint64_t seed_;
};

}  // namespace ledpose
