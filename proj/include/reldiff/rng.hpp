#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>

namespace reldiff {

/// Philox4x32-10 counter-based generator (Salmon et al. construction).
/// Stateless: the output is a pure function of (counter, key).
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(const Counter& c, const Key& k) {
  constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  const std::uint64_t p0 = m0 * c[0];
  const std::uint64_t p1 = m1 * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Counter generate(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    c = round(c, k);
  }
  return c;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Uniform double in the open interval (0, 1) built from 52 bits of two words.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

inline std::array<double, 2> box_muller(double u1, double u2) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
}

}  // namespace philox

/// Three independent N(0, ds) variates keyed by (seed, trajectory, step).
Eigen::Vector3d noise_increment(std::uint64_t seed, std::uint64_t trajectory_index,
                                std::uint64_t step_index, double ds);

/// Sequential stream on top of Philox for samplers that need many variates.
/// Distinct `stream` values give independent streams under the same seed.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t stream) : key_(philox::key_from_seed(seed)), stream_(stream) {}

  double uniform();
  double normal();
  Eigen::Vector3d unit_vector();

 private:
  void refill();

  philox::Key key_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  philox::Counter buf_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Random rotation, uniform in SO(3) (Haar), drawn from the stream.
Eigen::Matrix3d random_rotation(CounterStream& rng);

}  // namespace reldiff
