#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/CXX11/Tensor>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reldiff {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rank-3 array indexed (a, b, c); used for Christoffel symbols Gamma^a_{bc}.
using Rank3 = Eigen::TensorFixedSize<double, Eigen::Sizes<4, 4, 4>>;
/// Rank-4 array indexed (a, b, c, d); used for R^a_{bcd} and metric second derivatives.
using Rank4 = Eigen::TensorFixedSize<double, Eigen::Sizes<4, 4, 4, 4>>;

/// Minkowski metric in the (+,-,-,-) signature used throughout.
inline Mat4 eta() { return Eigen::Vector4d(1.0, -1.0, -1.0, -1.0).asDiagonal(); }

/// Raised when a point leaves the open domain of its chart.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct SpacetimePoint {
  int chart = 0;
  Vec4 coords = Vec4::Zero();

  bool operator==(const SpacetimePoint&) const = default;
};

struct MetricData {
  Mat4 g = Mat4::Zero();
  Rank3 gamma;
  Rank4 riemann;
  Mat4 ricci = Mat4::Zero();
  double scalar = 0.0;
  Mat4 energy_momentum = Mat4::Zero();
};

/// Metric together with its first (and optionally second) coordinate derivatives.
/// dg(a, b, c) = d_c g_ab ; d2g(a, b, c, d) = d_c d_d g_ab.
struct MetricJet {
  Mat4 g = Mat4::Zero();
  Rank3 dg;
  Rank4 d2g;
};

/// Orthonormal tetrad field and its derivatives: dtau(mu, a, c) = d_c tau^mu_a.
struct TetradJet {
  Mat4 tau = Mat4::Identity();
  Rank3 dtau;
};

using ParameterMap = std::map<std::string, double>;

/// A spacetime of the catalog. Implementations are immutable and safe to share
/// between threads.
class Spacetime {
 public:
  virtual ~Spacetime() = default;

  virtual const std::string& id() const = 0;
  virtual const ParameterMap& parameters() const = 0;
  virtual std::vector<std::string> chart_names() const = 0;

  /// Throws DomainError naming the violated bound.
  virtual void check_domain(const SpacetimePoint& p) const = 0;

  virtual Mat4 metric(const SpacetimePoint& p) const = 0;
  virtual MetricJet metric_jet1(const SpacetimePoint& p) const = 0;
  virtual MetricJet metric_jet2(const SpacetimePoint& p) const = 0;

  /// Orthonormal, future-directed, direct tetrad field regular on the whole chart.
  virtual Mat4 tetrad(const SpacetimePoint& p) const = 0;
  virtual TetradJet tetrad_jet(const SpacetimePoint& p) const = 0;

  /// Kretschmann scalar R_abcd R^abcd; closed form where the model provides one.
  virtual double kretschmann(const SpacetimePoint& p) const;

  /// True when the point sits in the region the diffusion treats as the chart's
  /// exit (e.g. r below the configured fraction of M in Schwarzschild).
  virtual bool in_exit_region(const SpacetimePoint& /*p*/, double /*exit_scale*/) const { return false; }

  /// Natural length unit of the spacetime (M for Schwarzschild, 1 otherwise).
  virtual double length_scale() const { return 1.0; }

  /// If the point should move to a companion chart, returns the Jacobian
  /// d(new coords)/d(old coords) and the mapped point.
  struct ChartMove {
    SpacetimePoint point;
    Mat4 jacobian;
  };
  virtual std::optional<ChartMove> chart_transition(const SpacetimePoint& /*p*/) const { return std::nullopt; }

  virtual bool is_flat() const { return false; }

  /// Christoffel symbols Gamma^a_{bc}; defaults to the first metric jet.
  virtual Rank3 christoffel(const SpacetimePoint& p) const;

  /// Connection form of the tetrad field along X = tau P, in tetrad components:
  /// tau^{-1} (d_X tau + Gamma(X, tau)) = [[0, a^T], [a, [w]x]].
  /// Defaults to the metric and tetrad jets; models override with closed forms.
  virtual void connection_form(const SpacetimePoint& p, const Vec4& P, Vec3& a, Vec3& w) const;

  /// Time-orientation functional: positive on future-directed timelike vectors.
  virtual double time_orientation(const SpacetimePoint& /*p*/, const Vec4& v) const { return v(0); }
};

using SpacetimePtr = std::shared_ptr<const Spacetime>;

/// Catalog lookup: "minkowski", "schwarzschild" (M), "flrw_power" (p),
/// "einstein_de_sitter" (flrw_power with p = 2/3), "de_sitter" (H).
/// Unknown ids or parameters, or non-positive physical parameters, throw std::invalid_argument.
SpacetimePtr make_spacetime(const std::string& id, const ParameterMap& params = {});
std::vector<std::string> catalog_ids();

/// Metric components supplied as a pure function of chart coordinates. Derivatives
/// are taken by finite differences, so analytic and oracle paths coincide here.
using MetricFunction = std::function<Mat4(const Vec4&)>;
/// Returns true inside the chart domain.
using DomainFunction = std::function<bool(const Vec4&)>;
SpacetimePtr make_user_spacetime(std::string id, MetricFunction metric, DomainFunction domain = {});

// Operations on the catalog. All throw DomainError for out-of-domain points.

Mat4 metric(const Spacetime& st, const SpacetimePoint& p);
Rank3 christoffel(const Spacetime& st, const SpacetimePoint& p);
Rank3 christoffel_from_jet(const MetricJet& jet);
MetricData curvature(const Spacetime& st, const SpacetimePoint& p);
MetricData curvature_from_jet(const MetricJet& jet);

/// Curvature computed only from nested central differences of metric().
MetricData curvature_oracle(const Spacetime& st, const SpacetimePoint& p);

double kretschmann_from(const MetricData& m);

/// Contraction T(u, v) for a symmetric 4x4 tensor.
inline double contract(const Mat4& t, const Vec4& u) { return u.dot(t * u); }

struct EnergyConditionReport {
  std::size_t n_samples = 0;
  double rho_max = 0.0;
  double weak_min = 0.0;       // min T(u,u)
  double strong_min = 0.0;     // min RIC(u,u)
  double ric_tilde_min = 0.0;
  double ric_tilde_max = 0.0;
};

/// Minima/maxima over future unit timelike vectors with rapidity uniform on
/// [0, rho_max] relative to the tetrad and direction uniform on S^2.
EnergyConditionReport energy_condition_report(const Spacetime& st, const SpacetimePoint& p,
                                              std::size_t n_samples, std::uint64_t seed,
                                              double rho_max = 5.0);

/// Lorentzian signature test: one positive and three negative eigenvalues.
bool has_lorentzian_signature(const Mat4& g);

}  // namespace reldiff
