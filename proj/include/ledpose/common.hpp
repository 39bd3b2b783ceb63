#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ledpose {

inline constexpr const char* kToolVersion = "0.1.0";

/// Bad run configuration (unknown key, invalid value, strategy mismatch).
/// Mapped to exit code 1 by the CLI.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset / file problem (missing image, malformed record).
/// Mapped to exit code 2 by the CLI.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// splitmix64 step; used to derive independent RNG streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed a generator from a root seed plus stream tags so that separate
/// stages (sessions, epochs, replicas) never share a stream.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag0 = 0,
                                std::uint64_t tag1 = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s) ^ (tag0 * 0xd6e8feb86659fd93ULL);
  std::uint64_t b = splitmix64(s) ^ (tag1 * 0xa5a5a5a5a5a5a5a5ULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

/// Shortest decimal form that round-trips a double; used anywhere output
/// files must be byte-reproducible.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace ledpose
