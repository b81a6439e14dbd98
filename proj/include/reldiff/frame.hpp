#pragma once

#include "reldiff/geometry.hpp"

#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace reldiff {

/// A point of the orthonormal frame bundle: base point and the four frame
/// vectors as columns of e (coordinate components).
struct Frame {
  SpacetimePoint point;
  Mat4 e = Mat4::Identity();

  bool operator==(const Frame&) const = default;
};

struct FrameTangent {
  Vec4 dm = Vec4::Zero();
  Mat4 de = Mat4::Zero();
};

class DegenerateFrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A geodesic or controlled step that left the chart domain.
class StepRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lorentz algebra kernels.

/// Boost generator E_j (j = 1, 2, 3): entries (0, j) and (j, 0) equal to one.
Mat4 boost_generator(int j);

/// exp(sum_j b_j E_j) in closed form.
Mat4 boost_matrix(const Vec3& b);

/// The pure boost taking (1, 0, 0, 0) to (gamma, p) with gamma = sqrt(1 + |p|^2).
Mat4 boost_to(const Vec3& p);

inline Mat4 embed_rotation(const Mat3& r) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(1, 1) = r;
  return m;
}

/// Nearest rotation in the Frobenius sense.
Mat3 project_to_so3(const Mat3& a);

// Frame operations.

double orthonormality_defect(const Spacetime& st, const Frame& f);
Frame reorthonormalize(const Spacetime& st, const Frame& f);
FrameTangent h0(const Spacetime& st, const Frame& f);
Frame vertical_flow(const Frame& f, const Vec3& b);

/// One RK4 step of the geodesic flow followed by reorthonormalize. Requires ds > 0.
Frame geodesic_step(const Spacetime& st, const Frame& f, double ds);
/// Same integrator without the sign restriction (used by backward probes).
Frame geodesic_flow(const Spacetime& st, const Frame& f, double ds);

bool is_future_directed(const Spacetime& st, const Frame& f);

/// Piecewise-cubic C^1 controls (h^1, h^2, h^3) on a sample grid.
class Controls {
 public:
  Controls() = default;
  Controls(std::vector<double> grid, std::vector<Vec3> values);

  Vec3 operator()(double s) const;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<Vec3>& values() const { return values_; }
  double horizon() const { return grid_.empty() ? 0.0 : grid_.back(); }

  /// Controls constant in time on [0, T] sampled every dt.
  static Controls constant(const Vec3& h, double T, double dt);

 private:
  struct Interp;
  std::vector<double> grid_;
  std::vector<Vec3> values_;
  std::shared_ptr<const Interp> interp_;
};

/// Integrates dPsi/ds = H0(Psi) + sum_j h^j(s) V_j(Psi) from f0 by RK4 with step ds,
/// returning frames on the grid of the controls.
std::vector<std::pair<double, Frame>> develop(const Spacetime& st, const Controls& c, const Frame& f0, double ds);

struct PathSample {
  double s = 0.0;
  SpacetimePoint point;
  Vec4 velocity = Vec4::Zero();
};

/// Recovers the controls of a unit-speed timelike path started from f0.
Controls anti_develop(const Spacetime& st, const std::vector<PathSample>& path, const Frame& f0);

// Frame presets.

/// The catalog tetrad itself (comoving observers in FLRW, rain observers in Schwarzschild).
Frame tetrad_frame(const Spacetime& st, const SpacetimePoint& p);
/// Static observer of Schwarzschild (requires r > 2M) with e_1 radial.
Frame static_observer_frame(const Spacetime& st, const SpacetimePoint& p);
/// Circular equatorial geodesic observer of Schwarzschild at radius r (requires r > 3M).
Frame circular_orbit_frame(const Spacetime& st, double r, double v0 = 0.0, double phi0 = 0.0);
/// Frame with e_0 along the given unit timelike vector; spatial legs by Gram-Schmidt of the tetrad.
Frame frame_with_velocity(const Spacetime& st, const SpacetimePoint& p, const Vec4& u);

}  // namespace reldiff
