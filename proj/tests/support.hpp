#pragma once

#include "reldiff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace testsupport {

using namespace reldiff;

/// Relative error of a against reference b, entrywise, with the denominator
/// floored at `floor_frac` of the reference's max-norm and at `abs_floor`.
/// A positive `scale` overrides the reference's own max-norm (used for Ricci
/// data, which may vanish identically while the Riemann tensor does not).
template <class Ta, class Tb>
double rel_error(const Ta* a, const Tb* b, int n, double floor_frac = 0.1, double abs_floor = 1e-10,
                 double scale = 0.0) {
  if (scale <= 0.0)
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(b[i]));
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    const double den = std::max({std::abs(b[i]), floor_frac * scale, abs_floor});
    err = std::max(err, std::abs(a[i] - b[i]) / den);
  }
  return err;
}

inline double rel_error(const Rank3& a, const Rank3& b) { return rel_error(a.data(), b.data(), 64); }
inline double rel_error(const Rank4& a, const Rank4& b) { return rel_error(a.data(), b.data(), 256); }
inline double rel_error(const Mat4& a, const Mat4& b) { return rel_error(a.data(), b.data(), 16); }

inline double max_abs(const Rank4& t) {
  double m = 0.0;
  for (int i = 0; i < 256; ++i) m = std::max(m, std::abs(t.data()[i]));
  return m;
}

/// Worst relative disagreement over every tensor of two curvature records.
inline double curvature_disagreement(const MetricData& a, const MetricData& o) {
  const double rs = max_abs(o.riemann);
  double e = std::max(rel_error(a.gamma, o.gamma), rel_error(a.riemann, o.riemann));
  e = std::max(e, rel_error(a.ricci.data(), o.ricci.data(), 16, 0.1, 1e-10, std::max(rs, o.ricci.cwiseAbs().maxCoeff())));
  e = std::max(e, rel_error(a.energy_momentum.data(), o.energy_momentum.data(), 16, 0.1, 1e-10,
                            std::max(rs, o.energy_momentum.cwiseAbs().maxCoeff())));
  e = std::max(e, rel_error(&a.scalar, &o.scalar, 1, 0.1, 1e-10, std::max(rs, std::abs(o.scalar))));
  return e;
}

/// Halton low-discrepancy point in [0,1)^4.
inline Eigen::Vector4d halton4(int i) {
  const int primes[4] = {2, 3, 5, 7};
  Eigen::Vector4d out;
  for (int d = 0; d < 4; ++d) {
    double f = 1.0, r = 0.0;
    int k = i + 1;
    while (k > 0) {
      f /= primes[d];
      r += f * (k % primes[d]);
      k /= primes[d];
    }
    out(d) = r;
  }
  return out;
}

struct Box {
  Eigen::Vector4d lo, hi;
};

/// Quasi-random in-domain sample boxes for each catalog entry.
inline Box sample_box(const std::string& id) {
  if (id == "schwarzschild") return {Eigen::Vector4d(-5, 1.0, 0.3, 0.0), Eigen::Vector4d(5, 20.0, M_PI - 0.3, 2 * M_PI)};
  if (id == "flrw_power" || id == "einstein_de_sitter")
    return {Eigen::Vector4d(0.5, -5, -5, -5), Eigen::Vector4d(3.0, 5, 5, 5)};
  if (id == "de_sitter") return {Eigen::Vector4d(-1, -5, -5, -5), Eigen::Vector4d(1, 5, 5, 5)};
  return {Eigen::Vector4d(-5, -5, -5, -5), Eigen::Vector4d(5, 5, 5, 5)};
}

inline std::vector<SpacetimePoint> quasi_random_points(const std::string& id, int n) {
  const Box b = sample_box(id);
  std::vector<SpacetimePoint> pts;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector4d u = halton4(i);
    SpacetimePoint p;
    p.coords = b.lo + u.cwiseProduct(b.hi - b.lo);
    if (id == "schwarzschild") p.chart = i % 2;
    pts.push_back(p);
  }
  return pts;
}

/// Lower-tail-free Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 100; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(s, 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic with the usual small-sample correction).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double ne = double(a.size()) * b.size() / (a.size() + b.size());
  const double sq = std::sqrt(ne);
  return kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
}

}  // namespace testsupport
