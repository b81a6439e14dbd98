#pragma once

#include "reldiff/frame.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace reldiff {

/// Named scalar function on the frame bundle.
struct FiberFunctional {
  std::string name;
  std::function<double(const Frame&)> eval;
  double operator()(const Frame& f) const { return eval(f); }
};

// ------------------------------------------------------------ curvature functionals

double ric_tilde(const Spacetime& st, const Frame& f);
double t_tilde(const Spacetime& st, const Frame& f);
/// Ricci tensor in the frame basis, e^T Ric e.
Mat4 frame_ricci(const Spacetime& st, const Frame& f);

// ------------------------------------------------------------ generator probes

struct GeneratorProbe {
  double h_first = 1e-3;   // geodesic (H0) central differences
  double h_second = 1e-2;  // vertical second differences
  bool richardson = true;  // one Richardson extrapolation with h/2
};

/// H0 F by central differences along the geodesic flow.
double apply_h0(const Spacetime& st, const FiberFunctional& F, const Frame& f, const GeneratorProbe& probe = {});
/// sum_j V_j^2 F by central second differences along the boosts.
double vertical_laplacian(const FiberFunctional& F, const Frame& f, const GeneratorProbe& probe = {});
/// H0 F + (sigma^2 / 2) sum_j V_j^2 F.
double apply_generator(const Spacetime& st, const FiberFunctional& F, const Frame& f, double sigma,
                       const GeneratorProbe& probe = {});

/// H0 RIC~ from finite differences of the Ricci field:
/// e0^a e0^b e0^c (d_c Ric_ab - 2 Gamma^d_ca Ric_db).
double h0_ric_tilde_direct(const Spacetime& st, const Frame& f, double h = 1e-3);

struct IdentityResidual {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // |lhs - rhs|
  double scale = 0.0;     // |RIC~| at the frame
};

/// G RIC~ against H0 RIC~ + 2 sigma^2 RIC~ + 2 sigma^2 T~.
IdentityResidual lemma9_residual(const Spacetime& st, const Frame& f, double sigma, const GeneratorProbe& probe = {});
/// sum_j V_j^2 RIC~ against 4 RIC~ + 4 T~.
IdentityResidual vertical_residual(const Spacetime& st, const Frame& f, const GeneratorProbe& probe = {});

// ------------------------------------------------------------ hyperbolic Green function

/// Green function of (1/2) Laplacian on H^3: (coth rho - 1) / (2 pi).
double green_h3(double rho);
/// (1/2)(u'' + 2 coth(rho) u') by five-point stencils.
double radial_half_laplacian(const std::function<double(double)>& u, double rho, double h = 1e-3);

struct QuadratureSpec {
  double rho_cut = 12.0;
  int rho_panels = 24;  // equal-width panels in rho
  int rho_order = 8;    // Gauss-Legendre nodes per panel
  int n_cos = 12;       // Gauss-Legendre nodes in cos(theta)
  int n_phi = 12;       // trapezoid nodes in phi

  /// Halves every node spacing.
  QuadratureSpec refined() const;
};

struct GrowthFit {
  double rate = 0.0;       // d log|F| / d rho
  double quadratic = 0.0;  // coefficient of rho^2
  double max_abs = 0.0;
  bool null = true;        // F vanished on every probe
};

/// Least-squares fit of log|F| = a + b rho + c rho^2 along boosted frames, rho in [rho_lo, rho_hi].
GrowthFit fit_fiber_growth(const FiberFunctional& F, const Frame& f, double rho_lo = 2.0, double rho_hi = 12.0);

struct UResult {
  double value = 0.0;
  double growth_rate = 0.0;  // exponential rate of RIC(y, y) on the fiber: 0 or 2
  double tail_bound = 0.0;   // bound on the neglected tail; infinite when the tail diverges
  bool tail_converges = true;
};

/// U = 2 int_{H^3} G(e0, y) RIC(y, y) dy on the fiber over the base point, truncated at rho_cut.
/// The tail converges only for vanishing Ricci curvature; see tail_converges.
UResult compute_U_detail(const Spacetime& st, const Frame& f, const QuadratureSpec& q = {});
double compute_U(const Spacetime& st, const Frame& f, const QuadratureSpec& q = {});
/// |(1/2) sum_j V_j^2 U + 2 RIC~|.
double poisson_residual(const Spacetime& st, const Frame& f, const QuadratureSpec& q = {},
                        const GeneratorProbe& probe = {});

// ------------------------------------------------------------ functional catalog

/// RIC_TILDE, T_TILDE, U, RIC_TILDE_PLUS_U, MDOT0 (coordinate time component of e0),
/// MDOT0_CAPPED (10 tanh(MDOT0 / 10)), ONE, ZERO.
FiberFunctional make_functional(const std::string& name, SpacetimePtr st, const QuadratureSpec& q = {});
std::vector<std::string> functional_names();

// ------------------------------------------------------------ checkers

enum class Verdict { Satisfied, Violated, Inconclusive };
std::string to_string(Verdict v);

struct Witness {
  std::string clause;
  Frame frame;
  std::map<std::string, double> values;

  bool operator==(const Witness&) const = default;
};

struct ClauseResult {
  std::string name;
  Verdict verdict = Verdict::Satisfied;
  double margin = 0.0;  // >= 0 when the clause holds on the samples
  std::string detail;

  bool operator==(const ClauseResult&) const = default;
};

/// Sampled region of the frame bundle over which "for all frames" clauses are tested.
struct SamplingEnvelope {
  int n_frames = 100;
  double rapidity_max = 3.0;
  std::uint64_t seed = 1;
  Vec4 lo = Vec4::Constant(-1.0);
  Vec4 hi = Vec4::Constant(1.0);

  bool operator==(const SamplingEnvelope&) const = default;
};

struct CriterionReport {
  std::string criterion;
  Verdict verdict = Verdict::Inconclusive;
  std::string failing_clause;  // first violated clause, empty otherwise
  std::vector<ClauseResult> clauses;
  std::vector<Witness> witnesses;
  std::map<std::string, double> constants;
  SamplingEnvelope envelope;
  std::string note;

  const ClauseResult* clause(const std::string& name) const;
  bool operator==(const CriterionReport&) const = default;
};

/// Default coordinate box for a catalog spacetime (exterior region for Schwarzschild).
SamplingEnvelope default_envelope(const Spacetime& st, int n_frames = 100, double rapidity_max = 3.0,
                                  std::uint64_t seed = 1);
/// Frames with base points uniform in the box, boost rapidities uniform in [0, rapidity_max]
/// in uniform directions, and Haar-random spatial rotations.
std::vector<Frame> sample_frames(const Spacetime& st, const SamplingEnvelope& env);

CriterionReport check_lemma7(const Spacetime& st, const FiberFunctional& F, const Frame& f0, double sigma, double C,
                             const std::vector<Frame>& samples, const GeneratorProbe& probe = {});
CriterionReport check_lemma11(const Spacetime& st, const FiberFunctional& F, const FiberFunctional& H, double c,
                              double c_prime, double sigma, const std::vector<Frame>& samples,
                              const GeneratorProbe& probe = {});
CriterionReport check_theorem8(const Spacetime& st, double sigma, double C, const std::vector<Frame>& samples);

struct SigmaWindow {
  double lo = 0.0;  // sqrt(c / 2)
  double hi = 0.0;  // sqrt(c' / (2 alpha))
  bool feasible = false;
  bool contains(double sigma) const { return feasible && lo < sigma && sigma < hi; }
};
SigmaWindow theorem12_window(double alpha, double c, double c_prime);

CriterionReport check_theorem12(const Spacetime& st, double sigma, double alpha, double c, double c_prime,
                                const std::vector<Frame>& samples, const QuadratureSpec& q = {});

}  // namespace reldiff
