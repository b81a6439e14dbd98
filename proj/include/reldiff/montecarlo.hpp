#pragma once

#include "reldiff/diffusion.hpp"
#include "reldiff/fiber.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace reldiff {

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for k successes in n trials at the given two-sided level.
WilsonInterval wilson_interval(std::size_t k, std::size_t n, double level = 0.95);

struct EnsembleOptions {
  int threads = 0;  // 0: all available workers
  /// Called from the orchestrating thread after the ensemble finishes with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Runs path i of an ensemble with trajectory_index = i. Minkowski uses the flat specialization.
Trajectory run_path(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0, std::uint64_t index,
                    const SimulateOptions& opts = {false, {}});

/// Evaluates body(i) for i in [0, n) on `threads` workers; results are stored by index,
/// so any reduction done afterwards in index order is independent of the worker count.
void parallel_paths(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// ------------------------------------------------------------ explosion

struct SweepPoint {
  double s_max = 0.0;
  std::size_t n_exploded = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const SweepPoint&) const = default;
};

struct ExplosionReport {
  std::string spacetime;
  std::size_t n_paths = 0;
  std::size_t n_exploded = 0;
  std::size_t n_completed = 0;
  std::vector<double> zeta_samples;             // exploded paths, in trajectory order
  std::map<std::string, std::size_t> reasons;  // explosion reason counts
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double s_max = 0.0;
  std::vector<SweepPoint> sweep;  // P(zeta <= s) read off the same paths
  DiffusionConfig config;
  Frame initial;
  std::string caveat;

  bool operator==(const ExplosionReport&) const = default;
};

/// P(zeta <= s_max) from n_paths runs. Sweep points are budgets s <= s_max; they reuse the
/// same paths, which is exact because a path run to a longer budget extends the shorter one.
/// Empty sweep: s_max / 16, s_max / 8, s_max / 4, s_max / 2, s_max.
ExplosionReport estimate_explosion(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0,
                                   std::size_t n_paths, std::vector<double> sweep = {},
                                   const EnsembleOptions& opts = {});

// ------------------------------------------------------------ moments

struct MomentCurve {
  std::string functional;
  std::vector<double> times;
  std::vector<double> means;
  std::vector<double> std_errors;
  std::vector<std::size_t> n_alive;   // paths still running at t
  std::vector<std::size_t> censored;  // paths terminated before t
  std::size_t n_paths = 0;
  double initial_value = 0.0;  // F(f0)

  bool operator==(const MomentCurve&) const = default;
};

/// Monte Carlo mean of F at the given times. Times must lie on the step grid k ds or equal s_max;
/// paths that explode before t are counted as censored and excluded from the mean.
MomentCurve exponential_moment(const Spacetime& st, const FiberFunctional& F, const DiffusionConfig& cfg,
                               const Frame& f0, std::size_t n_paths, const std::vector<double>& times,
                               const EnsembleOptions& opts = {});

// ------------------------------------------------------------ hitting

struct Region {
  std::string name;
  std::function<bool(const Frame&)> contains;
};

/// {r <= value} on the Schwarzschild charts.
Region region_r_below(double value);
/// Never satisfied.
Region region_empty();

struct HittingReport {
  std::string region;
  std::string entry;  // empty: clock starts at s = 0
  std::size_t n_paths = 0;
  std::size_t n_hit = 0;
  std::size_t n_exploded = 0;   // terminated without hitting
  std::size_t n_completed = 0;  // budget exhausted without hitting
  std::size_t n_entered = 0;    // paths that reached the entry region (all paths when entry is empty)
  double p_hit = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::vector<double> hit_times;  // measured from entry, in trajectory order
  std::map<std::string, double> quantiles;
  double s_max = 0.0;
  DiffusionConfig config;

  bool operator==(const HittingReport&) const = default;
};

/// First hitting of `region` at sample resolution. With an entry region, only paths that enter it
/// can hit, and times are measured from the first entry.
HittingReport hitting_stats(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0, std::size_t n_paths,
                            const Region& region, const Region* entry = nullptr, const EnsembleOptions& opts = {});

// ------------------------------------------------------------ tube

class TubeTooWide : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chart F(s, x) = exp_{gamma(s)}(sum_j x^j e_j(s)) around a timelike core given by frames
/// sampled on a uniform grid starting at s = 0.
class TubeChart {
 public:
  TubeChart(SpacetimePtr st, std::vector<std::pair<double, Frame>> core, double radius);

  const Spacetime& spacetime() const { return *st_; }
  double length() const { return core_.back().first; }
  double radius() const { return radius_; }
  const Frame& start() const { return core_.front().second; }

  /// Core frame at s by linear interpolation of the samples followed by reorthonormalization.
  Frame core_frame(double s) const;
  /// F(s, x) in the chart of the core frame at s.
  SpacetimePoint map(double s, const Vec3& x) const;
  /// Newton inversion of F from the guess (s, x); false if it does not converge.
  bool invert(const SpacetimePoint& p, double& s, Vec3& x) const;

  /// Sampled necessary condition for injectivity: Jacobian of F of constant sign and not
  /// degenerate, and inversion from the core recovering the sampled parameters.
  /// Throws TubeTooWide naming the failing sample.
  void check_injective(int n_samples, std::uint64_t seed) const;

 private:
  SpacetimePtr st_;
  std::vector<std::pair<double, Frame>> core_;
  double radius_;
  double h_;
};

/// Geodesic core of proper length T started at f0, sampled every ds.
std::vector<std::pair<double, Frame>> geodesic_core(const Spacetime& st, const Frame& f0, double T, double ds);

struct TubeReport {
  std::size_t n_paths = 0;
  std::size_t far_cap = 0;
  std::size_t lateral = 0;
  std::size_t near_cap = 0;
  std::size_t exploded = 0;  // terminated inside the tube
  std::size_t inside = 0;    // budget exhausted inside the tube
  double p_far_cap = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double length = 0.0;
  double radius = 0.0;
  int injectivity_samples = 0;
  DiffusionConfig config;

  bool operator==(const TubeReport&) const = default;
};

/// Starts the diffusion at the core frame at s = 0 and classifies the first exit through
/// the far cap s = T, the lateral boundary |x| = u, or the near cap s = 0.
TubeReport tube_test(const TubeChart& tube, const DiffusionConfig& cfg, std::size_t n_paths,
                     int injectivity_samples = 200, const EnsembleOptions& opts = {});

}  // namespace reldiff
