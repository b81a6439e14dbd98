#pragma once

#include "reldiff/frame.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace reldiff {

/// Thresholds defining the exhaustion sets used as explosion proxies.
struct ExplosionThresholds {
  double coord_bound = 1e300;     // max |coordinate|
  double curvature_bound = 1e12;  // Kretschmann, in units of length_scale^-4
  double min_step = 1e-9;         // smallest admissible step after halving
  double chart_exit_scale = 1e-3; // exit region size in units of length_scale

  bool operator==(const ExplosionThresholds&) const = default;
};

struct DiffusionConfig {
  double sigma = 1.0;
  double ds = 1e-2;
  double s_max = 10.0;
  ExplosionThresholds explosion;
  std::uint64_t seed = 0;
  std::uint64_t trajectory_index = 0;
  int output_stride = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const DiffusionConfig&) const = default;
};

enum class Termination { BudgetExhausted, Exploded };
enum class ExplosionReason { None, CoordBound, CurvatureBound, StepCollapse, ChartExit };

std::string to_string(Termination t);
std::string to_string(ExplosionReason r);
/// "BudgetExhausted" or "Exploded(<reason>)".
std::string verdict_string(Termination t, ExplosionReason r);

/// Frame stored as e = tau(x) B(p) diag(1, R): p is the tetrad momentum of e_0 and
/// R a rotation. Boosts of any size are represented without cancellation.
struct FrameState {
  SpacetimePoint point;
  Vec3 p = Vec3::Zero();
  Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();

  // stableNorm: |p| reaches e^400 on long Minkowski runs
  double gamma() const { return std::hypot(1.0, p.stableNorm()); }
  double rapidity() const { return std::asinh(p.stableNorm()); }
};

FrameState to_state(const Spacetime& st, const Frame& f);
Frame to_frame(const Spacetime& st, const FrameState& s);
/// Orthonormality defect of the factored representation (tetrad and rotation parts).
double structural_defect(const Spacetime& st, const FrameState& s);

/// Exact boost e <- e exp(sum b_j E_j) on a factored frame.
FrameState vertical_step(const FrameState& s, const Vec3& b);
/// RK4 step of the horizontal flow on a factored frame; throws StepRejected.
FrameState horizontal_step(const Spacetime& st, const FrameState& s, double ds);
/// Strang splitting: half boost, geodesic step, half boost.
FrameState split_step(const Spacetime& st, const FrameState& s, double sigma, double ds, const Vec3& dW);

/// One step of the scheme on an explicit frame: vertical_flow(sigma dW / 2),
/// geodesic_step(ds), vertical_flow(sigma dW / 2).
Frame step(const Spacetime& st, const Frame& f, const DiffusionConfig& cfg, const Vec3& dW);

struct TrajectorySample {
  double s = 0.0;
  Frame frame;
  double defect = 0.0;
};

struct ChartTransition {
  double s = 0.0;
  int from = 0;
  int to = 0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<ChartTransition> transitions;
  Termination termination = Termination::BudgetExhausted;
  ExplosionReason reason = ExplosionReason::None;
  double zeta = 0.0;  // proper time at termination
  std::uint64_t steps = 0;
  std::uint64_t halvings = 0;
  FrameState final_state;
};

/// Called after every accepted step (and once at s = 0); return false to stop early.
using StepObserver = std::function<bool(double s, const FrameState& state)>;

struct SimulateOptions {
  bool record = true;
  StepObserver observer;
};

Trajectory simulate(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0,
                    const SimulateOptions& opts = {});

/// Minkowski specialization: no connection, exact straight-line position updates.
Trajectory dudley_simulate(const DiffusionConfig& cfg, const Frame& f0, const SimulateOptions& opts = {});

}  // namespace reldiff
