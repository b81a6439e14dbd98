#include "reldiff/rng.hpp"

#include <Eigen/Geometry>

#include <stdexcept>

namespace reldiff {

Eigen::Vector3d noise_increment(std::uint64_t seed, std::uint64_t trajectory_index, std::uint64_t step_index,
                                double ds) {
  if (trajectory_index > 0xFFFFFFFFull) throw std::out_of_range("trajectory_index exceeds 32 bits");
  const philox::Key key = philox::key_from_seed(seed);
  philox::Counter c{static_cast<std::uint32_t>(step_index), static_cast<std::uint32_t>(step_index >> 32),
                    static_cast<std::uint32_t>(trajectory_index), 0u};
  const philox::Counter r0 = philox::generate(c, key);
  c[3] = 1u;
  const philox::Counter r1 = philox::generate(c, key);
  const auto n01 = philox::box_muller(philox::to_open_unit(r0[0], r0[1]), philox::to_open_unit(r0[2], r0[3]));
  const auto n23 = philox::box_muller(philox::to_open_unit(r1[0], r1[1]), philox::to_open_unit(r1[2], r1[3]));
  const double s = std::sqrt(ds);
  return {s * n01[0], s * n01[1], s * n23[0]};
}

void CounterStream::refill() {
  philox::Counter c{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), stream_,
                    0xA5A5A5A5u};
  buf_ = philox::generate(c, key_);
  ++block_;
  used_ = 0;
}

double CounterStream::uniform() {
  if (used_ > 2) refill();
  const double u = philox::to_open_unit(buf_[used_], buf_[used_ + 1]);
  used_ += 2;
  return u;
}

double CounterStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const auto n = philox::box_muller(u1, u2);
  spare_ = n[1];
  has_spare_ = true;
  return n[0];
}

Eigen::Vector3d CounterStream::unit_vector() {
  const double z = 2.0 * uniform() - 1.0;
  const double phi = 6.283185307179586476925286766559 * uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

Eigen::Matrix3d random_rotation(CounterStream& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace reldiff
