#include "reldiff/geometry.hpp"

#include "autodiff.hpp"
#include "reldiff/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace reldiff {

using ad::AD1;
using ad::AD2;
using ad::Mat4T;
using ad::Vec4T;

namespace {

template <class T>
MetricJet jet_from(const Mat4T<T>& g);

template <>
MetricJet jet_from<AD1>(const Mat4T<AD1>& g) {
  MetricJet jet;
  jet.dg.setZero();
  jet.d2g.setZero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      jet.g(a, b) = g(a, b).value();
      for (int c = 0; c < 4; ++c) jet.dg(a, b, c) = g(a, b).derivatives()(c);
    }
  return jet;
}

template <>
MetricJet jet_from<AD2>(const Mat4T<AD2>& g) {
  MetricJet jet;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      jet.g(a, b) = g(a, b).value().value();
      for (int c = 0; c < 4; ++c) {
        jet.dg(a, b, c) = g(a, b).value().derivatives()(c);
        for (int d = 0; d < 4; ++d) jet.d2g(a, b, c, d) = g(a, b).derivatives()(c).derivatives()(d);
      }
    }
  return jet;
}

Mat4 inverse_metric(const Mat4& g) {
  Eigen::FullPivLU<Mat4> lu(g);
  if (!lu.isInvertible()) throw DomainError("metric is degenerate");
  return lu.inverse();
}

// Shared implementation of the catalog: Derived supplies templated metric_t / tetrad_t.
template <class Derived>
class AnalyticSpacetime : public Spacetime {
 public:
  AnalyticSpacetime(std::string id, ParameterMap params) : id_(std::move(id)), params_(std::move(params)) {}

  const std::string& id() const override { return id_; }
  const ParameterMap& parameters() const override { return params_; }

  Mat4 metric(const SpacetimePoint& p) const override {
    check_domain(p);
    return self().template metric_t<double>(p.coords);
  }
  MetricJet metric_jet1(const SpacetimePoint& p) const override {
    check_domain(p);
    return jet_from<AD1>(self().template metric_t<AD1>(ad::seed1(p.coords)));
  }
  MetricJet metric_jet2(const SpacetimePoint& p) const override {
    check_domain(p);
    return jet_from<AD2>(self().template metric_t<AD2>(ad::seed2(p.coords)));
  }
  Mat4 tetrad(const SpacetimePoint& p) const override {
    check_domain(p);
    return self().template tetrad_t<double>(p.coords);
  }
  TetradJet tetrad_jet(const SpacetimePoint& p) const override {
    check_domain(p);
    const Mat4T<AD1> t = self().template tetrad_t<AD1>(ad::seed1(p.coords));
    TetradJet jet;
    for (int m = 0; m < 4; ++m)
      for (int a = 0; a < 4; ++a) {
        jet.tau(m, a) = t(m, a).value();
        for (int c = 0; c < 4; ++c) jet.dtau(m, a, c) = t(m, a).derivatives().size() ? t(m, a).derivatives()(c) : 0.0;
      }
    return jet;
  }

 protected:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
  double param(const std::string& k) const { return params_.at(k); }

 private:
  std::string id_;
  ParameterMap params_;
};

template <class T>
T constant(double v) {
  return T(v);
}

class Minkowski final : public AnalyticSpacetime<Minkowski> {
 public:
  Minkowski() : AnalyticSpacetime("minkowski", {}) {}
  std::vector<std::string> chart_names() const override { return {"cartesian"}; }
  void check_domain(const SpacetimePoint& p) const override {
    if (p.chart != 0) throw DomainError(fmt::format("minkowski: unknown chart {}", p.chart));
    if (!p.coords.allFinite()) throw DomainError("minkowski: coordinates must be finite");
  }
  template <class T>
  Mat4T<T> metric_t(const Vec4T<T>&) const {
    Mat4T<T> g = Mat4T<T>::Constant(constant<T>(0.0));
    g(0, 0) = T(1.0);
    g(1, 1) = g(2, 2) = g(3, 3) = T(-1.0);
    return g;
  }
  template <class T>
  Mat4T<T> tetrad_t(const Vec4T<T>&) const {
    Mat4T<T> t = Mat4T<T>::Constant(constant<T>(0.0));
    for (int i = 0; i < 4; ++i) t(i, i) = T(1.0);
    return t;
  }
  double kretschmann(const SpacetimePoint& p) const override {
    check_domain(p);
    return 0.0;
  }
  bool is_flat() const override { return true; }
  Rank3 christoffel(const SpacetimePoint& p) const override {
    check_domain(p);
    Rank3 g;
    g.setZero();
    return g;
  }
  void connection_form(const SpacetimePoint&, const Vec4&, Vec3& a, Vec3& w) const override {
    a.setZero();
    w.setZero();
  }
};

// Ingoing Eddington-Finkelstein (v, r, theta, phi); chart 1 is the same form in
// spherical angles about a cyclically permuted axis.
class Schwarzschild final : public AnalyticSpacetime<Schwarzschild> {
 public:
  explicit Schwarzschild(double M) : AnalyticSpacetime("schwarzschild", {{"M", M}}), M_(M) {}

  std::vector<std::string> chart_names() const override { return {"ef", "ef_rot"}; }

  void check_domain(const SpacetimePoint& p) const override {
    if (p.chart != 0 && p.chart != 1) throw DomainError(fmt::format("schwarzschild: unknown chart {}", p.chart));
    const double r = p.coords(1), th = p.coords(2);
    if (!p.coords.allFinite()) throw DomainError("schwarzschild: coordinates must be finite");
    if (!(r > 0.0)) throw DomainError(fmt::format("schwarzschild: bound r > 0 violated (r = {})", r));
    if (!(th > 0.0 && th < M_PI))
      throw DomainError(fmt::format("schwarzschild: bound 0 < theta < pi violated (theta = {})", th));
  }

  template <class T>
  Mat4T<T> metric_t(const Vec4T<T>& x) const {
    using std::sin;
    const T& r = x(1);
    const T s = sin(x(2));
    Mat4T<T> g = Mat4T<T>::Constant(constant<T>(0.0));
    g(0, 0) = T(1.0) - 2.0 * M_ / r;
    g(0, 1) = g(1, 0) = T(-1.0);
    g(2, 2) = -r * r;
    g(3, 3) = -r * r * s * s;
    return g;
  }

  template <class T>
  Mat4T<T> tetrad_t(const Vec4T<T>& x) const {
    using std::sin;
    using std::sqrt;
    const T& r = x(1);
    const T beta = sqrt(2.0 * M_ / r);
    const T k = T(1.0) / (T(1.0) + beta);
    Mat4T<T> t = Mat4T<T>::Constant(constant<T>(0.0));
    t(0, 0) = k;
    t(1, 0) = -beta;
    t(0, 1) = k;
    t(1, 1) = T(1.0);
    t(2, 2) = T(1.0) / r;
    t(3, 3) = T(1.0) / (r * sin(x(2)));
    return t;
  }

  double kretschmann(const SpacetimePoint& p) const override {
    check_domain(p);
    const double r = p.coords(1);
    return 48.0 * M_ * M_ / std::pow(r, 6);
  }
  bool in_exit_region(const SpacetimePoint& p, double scale) const override { return p.coords(1) <= scale * M_; }
  double length_scale() const override { return M_; }

  Rank3 christoffel(const SpacetimePoint& p) const override {
    check_domain(p);
    const double M = M_, r = p.coords(1), th = p.coords(2);
    const double f = 1.0 - 2.0 * M / r, s = std::sin(th), c = std::cos(th);
    Rank3 G;
    G.setZero();
    G(0, 0, 0) = M / (r * r);
    G(0, 2, 2) = -r;
    G(0, 3, 3) = -r * s * s;
    G(1, 0, 0) = M * f / (r * r);
    G(1, 0, 1) = G(1, 1, 0) = -M / (r * r);
    G(1, 2, 2) = -r * f;
    G(1, 3, 3) = -r * f * s * s;
    G(2, 1, 2) = G(2, 2, 1) = 1.0 / r;
    G(2, 3, 3) = -s * c;
    G(3, 1, 3) = G(3, 3, 1) = 1.0 / r;
    G(3, 2, 3) = G(3, 3, 2) = c / s;
    return G;
  }

  void connection_form(const SpacetimePoint& p, const Vec4& P, Vec3& a, Vec3& w) const override {
    const double r = p.coords(1);
    const double beta = std::sqrt(2.0 * M_ / r);
    a << 0.5 * beta / r * P(1), -beta / r * P(2), -beta / r * P(3);
    w << P(3) / (r * std::tan(p.coords(2))), -P(3) / r, P(2) / r;
  }

  std::optional<ChartMove> chart_transition(const SpacetimePoint& p) const override {
    if (std::sin(p.coords(2)) >= 0.05) return std::nullopt;
    const int to = 1 - p.chart;
    const Vec4T<AD1> x = ad::seed1(p.coords);
    const Vec4T<AD1> y = map_angles<AD1>(x, p.chart == 0);
    ChartMove mv;
    mv.point.chart = to;
    mv.jacobian.setZero();
    for (int i = 0; i < 4; ++i) {
      mv.point.coords(i) = y(i).value();
      mv.jacobian.row(i) = y(i).derivatives().transpose();
    }
    return mv;
  }

  template <class T>
  static Vec4T<T> map_angles(const Vec4T<T>& x, bool forward) {
    using std::acos;
    using std::atan2;
    using std::cos;
    using std::sin;
    const T st = sin(x(2));
    const T nx = st * cos(x(3)), ny = st * sin(x(3)), nz = cos(x(2));
    // forward: n' = (ny, nz, nx); backward: n = (n'z, n'x, n'y)
    const T ax = forward ? ny : nz;
    const T ay = forward ? nz : nx;
    const T az = forward ? nx : ny;
    Vec4T<T> y;
    y(0) = x(0);
    y(1) = x(1);
    y(2) = acos(az);
    y(3) = atan2(ay, ax);
    return y;
  }

 private:
  double M_;
};

// Spatially flat FLRW in comoving coordinates with scale factor a(t) = t^p.
class FlrwPower final : public AnalyticSpacetime<FlrwPower> {
 public:
  FlrwPower(std::string id, double p) : AnalyticSpacetime(std::move(id), {{"p", p}}), p_(p) {}
  std::vector<std::string> chart_names() const override { return {"comoving"}; }
  void check_domain(const SpacetimePoint& q) const override {
    if (q.chart != 0) throw DomainError(fmt::format("{}: unknown chart {}", id(), q.chart));
    if (!q.coords.allFinite()) throw DomainError(fmt::format("{}: coordinates must be finite", id()));
    if (!(q.coords(0) > 0.0)) throw DomainError(fmt::format("{}: bound t > 0 violated (t = {})", id(), q.coords(0)));
  }
  template <class T>
  Mat4T<T> metric_t(const Vec4T<T>& x) const {
    using std::exp;
    using std::log;
    const T a2 = exp(2.0 * p_ * log(x(0)));
    Mat4T<T> g = Mat4T<T>::Constant(constant<T>(0.0));
    g(0, 0) = T(1.0);
    g(1, 1) = g(2, 2) = g(3, 3) = -a2;
    return g;
  }
  template <class T>
  Mat4T<T> tetrad_t(const Vec4T<T>& x) const {
    using std::exp;
    using std::log;
    const T ia = exp(-p_ * log(x(0)));
    Mat4T<T> t = Mat4T<T>::Constant(constant<T>(0.0));
    t(0, 0) = T(1.0);
    t(1, 1) = t(2, 2) = t(3, 3) = ia;
    return t;
  }
  double kretschmann(const SpacetimePoint& q) const override {
    check_domain(q);
    const double t = q.coords(0);
    return 12.0 * (p_ * p_ * (p_ - 1) * (p_ - 1) + std::pow(p_, 4)) / std::pow(t, 4);
  }
  Rank3 christoffel(const SpacetimePoint& q) const override {
    check_domain(q);
    const double t = q.coords(0);
    const double a2 = std::pow(t, 2 * p_);
    const double hub = p_ / t;
    Rank3 G;
    G.setZero();
    for (int i = 1; i < 4; ++i) {
      G(0, i, i) = a2 * hub;
      G(i, 0, i) = G(i, i, 0) = hub;
    }
    return G;
  }
  void connection_form(const SpacetimePoint& q, const Vec4& P, Vec3& a, Vec3& w) const override {
    a = (p_ / q.coords(0)) * P.tail<3>();
    w.setZero();
  }

 private:
  double p_;
};

// de Sitter expanding slice: a(t) = exp(H t).
class DeSitter final : public AnalyticSpacetime<DeSitter> {
 public:
  explicit DeSitter(double H) : AnalyticSpacetime("de_sitter", {{"H", H}}), H_(H) {}
  std::vector<std::string> chart_names() const override { return {"flat_slicing"}; }
  void check_domain(const SpacetimePoint& q) const override {
    if (q.chart != 0) throw DomainError(fmt::format("de_sitter: unknown chart {}", q.chart));
    if (!q.coords.allFinite()) throw DomainError("de_sitter: coordinates must be finite");
  }
  template <class T>
  Mat4T<T> metric_t(const Vec4T<T>& x) const {
    using std::exp;
    const T a2 = exp(2.0 * H_ * x(0));
    Mat4T<T> g = Mat4T<T>::Constant(constant<T>(0.0));
    g(0, 0) = T(1.0);
    g(1, 1) = g(2, 2) = g(3, 3) = -a2;
    return g;
  }
  template <class T>
  Mat4T<T> tetrad_t(const Vec4T<T>& x) const {
    using std::exp;
    const T ia = exp(-H_ * x(0));
    Mat4T<T> t = Mat4T<T>::Constant(constant<T>(0.0));
    t(0, 0) = T(1.0);
    t(1, 1) = t(2, 2) = t(3, 3) = ia;
    return t;
  }
  double kretschmann(const SpacetimePoint& q) const override {
    check_domain(q);
    return 24.0 * std::pow(H_, 4);
  }
  Rank3 christoffel(const SpacetimePoint& q) const override {
    check_domain(q);
    const double a2 = std::exp(2.0 * H_ * q.coords(0));
    Rank3 G;
    G.setZero();
    for (int i = 1; i < 4; ++i) {
      G(0, i, i) = a2 * H_;
      G(i, 0, i) = G(i, i, 0) = H_;
    }
    return G;
  }
  void connection_form(const SpacetimePoint&, const Vec4& P, Vec3& a, Vec3& w) const override {
    a = H_ * P.tail<3>();
    w.setZero();
  }

 private:
  double H_;
};

// Fourth-order central difference weights for first derivatives.
template <class F>
auto central4(const F& f, double h) {
  return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
}

// Sixth-order central difference.
template <class F>
auto central6(const F& f, double h) {
  return (-f(-3.0 * h) + 9.0 * f(-2.0 * h) - 45.0 * f(-h) + 45.0 * f(h) - 9.0 * f(2.0 * h) + f(3.0 * h)) / (60.0 * h);
}

Rank3 fd_metric_derivative(const std::function<Mat4(const Vec4&)>& g, const Vec4& x, double rel) {
  Rank3 dg;
  for (int c = 0; c < 4; ++c) {
    const double h = rel * (1.0 + std::abs(x(c)));
    const Mat4 d = central4(
        [&](double s) {
          Vec4 y = x;
          y(c) += s;
          return Mat4(g(y));
        },
        h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) dg(a, b, c) = d(a, b);
  }
  return dg;
}

Rank3 fd_metric_derivative6(const std::function<Mat4(const Vec4&)>& g, const Vec4& x, double rel) {
  Rank3 dg;
  for (int c = 0; c < 4; ++c) {
    const double h = rel * (1.0 + std::abs(x(c)));
    const Mat4 d = central6(
        [&](double s) {
          Vec4 y = x;
          y(c) += s;
          return Mat4(g(y));
        },
        h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) dg(a, b, c) = d(a, b);
  }
  return dg;
}

// Lorentzian Gram-Schmidt of the coordinate basis, starting from d_0.
Mat4 gram_schmidt_tetrad(const Mat4& g) {
  Mat4 t = Mat4::Identity();
  for (int j = 0; j < 4; ++j) {
    Vec4 v = t.col(j);
    for (int k = 0; k < j; ++k) {
      const Vec4 u = t.col(k);
      v -= (u.dot(g * v) / u.dot(g * u)) * u;
    }
    const double n = v.dot(g * v);
    if (j == 0 ? !(n > 0) : !(n < 0)) throw DomainError("user metric: coordinate basis not suited to a tetrad");
    t.col(j) = v / std::sqrt(std::abs(n));
  }
  return t;
}

class UserSpacetime final : public Spacetime {
 public:
  UserSpacetime(std::string id, MetricFunction g, DomainFunction dom)
      : id_(std::move(id)), g_(std::move(g)), dom_(std::move(dom)) {}
  const std::string& id() const override { return id_; }
  const ParameterMap& parameters() const override { return params_; }
  std::vector<std::string> chart_names() const override { return {"user"}; }
  void check_domain(const SpacetimePoint& p) const override {
    if (p.chart != 0) throw DomainError(fmt::format("{}: unknown chart {}", id_, p.chart));
    if (dom_ && !dom_(p.coords)) throw DomainError(fmt::format("{}: point outside the chart domain", id_));
  }
  Mat4 metric(const SpacetimePoint& p) const override {
    check_domain(p);
    return g_(p.coords);
  }
  MetricJet metric_jet1(const SpacetimePoint& p) const override {
    check_domain(p);
    MetricJet jet;
    jet.g = g_(p.coords);
    jet.dg = fd_metric_derivative(g_, p.coords, 1e-3);
    jet.d2g.setZero();
    return jet;
  }
  MetricJet metric_jet2(const SpacetimePoint& p) const override {
    MetricJet jet = metric_jet1(p);
    for (int d = 0; d < 4; ++d) {
      const double h = 1e-2 * (1.0 + std::abs(p.coords(d)));
      const Rank3 dd = central4(
          [&](double s) {
            Vec4 y = p.coords;
            y(d) += s;
            return Rank3(fd_metric_derivative(g_, y, 1e-3));
          },
          h);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int c = 0; c < 4; ++c) jet.d2g(a, b, c, d) = dd(a, b, c);
    }
    return jet;
  }
  Mat4 tetrad(const SpacetimePoint& p) const override { return gram_schmidt_tetrad(metric(p)); }
  TetradJet tetrad_jet(const SpacetimePoint& p) const override {
    TetradJet jet;
    jet.tau = tetrad(p);
    for (int c = 0; c < 4; ++c) {
      const double h = 1e-3 * (1.0 + std::abs(p.coords(c)));
      const Mat4 d = central4(
          [&](double s) {
            SpacetimePoint q = p;
            q.coords(c) += s;
            return Mat4(tetrad(q));
          },
          h);
      for (int m = 0; m < 4; ++m)
        for (int a = 0; a < 4; ++a) jet.dtau(m, a, c) = d(m, a);
    }
    return jet;
  }

 private:
  std::string id_;
  ParameterMap params_;
  MetricFunction g_;
  DomainFunction dom_;
};

void require_positive(const ParameterMap& params, const std::string& id, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) return;
  if (!(it->second > 0.0) || !std::isfinite(it->second))
    throw std::invalid_argument(fmt::format("{}: parameter {} must be > 0 (got {})", id, key, it->second));
}

double get_or(const ParameterMap& params, const std::string& key, double def) {
  const auto it = params.find(key);
  return it == params.end() ? def : it->second;
}

void only_keys(const ParameterMap& params, const std::string& id, std::initializer_list<const char*> allowed) {
  for (const auto& kv : params) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return kv.first == k; }))
      throw std::invalid_argument(fmt::format("{}: unknown parameter '{}'", id, kv.first));
  }
}

}  // namespace

double Spacetime::kretschmann(const SpacetimePoint& p) const { return kretschmann_from(reldiff::curvature(*this, p)); }

Rank3 Spacetime::christoffel(const SpacetimePoint& p) const { return christoffel_from_jet(metric_jet1(p)); }

void Spacetime::connection_form(const SpacetimePoint& p, const Vec4& P, Vec3& a, Vec3& w) const {
  const TetradJet tj = tetrad_jet(p);
  const Rank3 G = christoffel(p);
  const Vec4 X = tj.tau * P;
  Mat4 A = Mat4::Zero();
  for (int m = 0; m < 4; ++m)
    for (int b = 0; b < 4; ++b) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c) s += tj.dtau(m, b, c) * X(c);
      for (int n = 0; n < 4; ++n)
        for (int l = 0; l < 4; ++l) s += G(m, n, l) * X(n) * tj.tau(l, b);
      A(m, b) = s;
    }
  const Mat4 om = tj.tau.inverse() * A;
  a << om(1, 0), om(2, 0), om(3, 0);
  w << om(3, 2), om(1, 3), om(2, 1);
}

SpacetimePtr make_spacetime(const std::string& id, const ParameterMap& params) {
  if (id == "minkowski") {
    only_keys(params, id, {});
    return std::make_shared<Minkowski>();
  }
  if (id == "schwarzschild") {
    only_keys(params, id, {"M"});
    require_positive(params, id, "M");
    return std::make_shared<Schwarzschild>(get_or(params, "M", 1.0));
  }
  if (id == "flrw_power") {
    only_keys(params, id, {"p"});
    require_positive(params, id, "p");
    return std::make_shared<FlrwPower>(id, get_or(params, "p", 2.0 / 3.0));
  }
  if (id == "einstein_de_sitter") {
    only_keys(params, id, {});
    return std::make_shared<FlrwPower>(id, 2.0 / 3.0);
  }
  if (id == "de_sitter") {
    only_keys(params, id, {"H"});
    require_positive(params, id, "H");
    return std::make_shared<DeSitter>(get_or(params, "H", 1.0));
  }
  throw std::invalid_argument(fmt::format("unknown spacetime id '{}'", id));
}

std::vector<std::string> catalog_ids() {
  return {"minkowski", "schwarzschild", "flrw_power", "einstein_de_sitter", "de_sitter"};
}

SpacetimePtr make_user_spacetime(std::string id, MetricFunction metric, DomainFunction domain) {
  if (!metric) throw std::invalid_argument("user spacetime needs a metric function");
  return std::make_shared<UserSpacetime>(std::move(id), std::move(metric), std::move(domain));
}

Mat4 metric(const Spacetime& st, const SpacetimePoint& p) { return st.metric(p); }

Rank3 christoffel(const Spacetime& st, const SpacetimePoint& p) { return st.christoffel(p); }

Rank3 christoffel_from_jet(const MetricJet& jet) {
  const Mat4 gi = inverse_metric(jet.g);
  Rank3 G;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = b; c < 4; ++c) {
        double s = 0.0;
        for (int d = 0; d < 4; ++d) s += gi(a, d) * (jet.dg(d, c, b) + jet.dg(d, b, c) - jet.dg(b, c, d));
        G(a, b, c) = G(a, c, b) = 0.5 * s;
      }
  return G;
}

namespace {

// Riemann, Ricci, scalar and T from Gamma and its derivative dG(a,b,c,e) = d_e Gamma^a_bc.
MetricData assemble(const Mat4& g, const Rank3& G, const Rank4& dG) {
  MetricData m;
  m.g = g;
  m.gamma = G;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          double s = dG(a, d, b, c) - dG(a, c, b, d);
          for (int e = 0; e < 4; ++e) s += G(a, c, e) * G(e, d, b) - G(a, d, e) * G(e, c, b);
          m.riemann(a, b, c, d) = s;
        }
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) {
      double s = 0.0;
      for (int a = 0; a < 4; ++a) s += m.riemann(a, b, a, d);
      m.ricci(b, d) = s;
    }
  m.ricci = (0.5 * (m.ricci + m.ricci.transpose())).eval();
  const Mat4 gi = inverse_metric(g);
  m.scalar = (gi.cwiseProduct(m.ricci)).sum();
  m.energy_momentum = m.ricci - 0.5 * m.scalar * g;
  return m;
}

}  // namespace

MetricData curvature_from_jet(const MetricJet& jet) {
  const Mat4 gi = inverse_metric(jet.g);
  const Rank3 G = christoffel_from_jet(jet);
  // d_e g^{ad} = -g^{ap} d_e g_pq g^{qd}
  Rank3 dgi;
  for (int e = 0; e < 4; ++e) {
    Mat4 d;
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) d(p, q) = jet.dg(p, q, e);
    const Mat4 r = -gi * d * gi;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) dgi(a, b, e) = r(a, b);
  }
  Rank4 dG;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int e = 0; e < 4; ++e) {
          double s = 0.0;
          for (int d = 0; d < 4; ++d) {
            s += dgi(a, d, e) * (jet.dg(d, c, b) + jet.dg(d, b, c) - jet.dg(b, c, d));
            s += gi(a, d) * (jet.d2g(d, c, b, e) + jet.d2g(d, b, c, e) - jet.d2g(b, c, d, e));
          }
          dG(a, b, c, e) = 0.5 * s;
        }
  return assemble(jet.g, G, dG);
}

MetricData curvature(const Spacetime& st, const SpacetimePoint& p) { return curvature_from_jet(st.metric_jet2(p)); }

namespace {

// Both stencil levels are sixth-order central differences with h = step * (1 + |x|).
constexpr double kInnerStep = 1e-3;
constexpr double kOuterStep = 1e-3;

Rank3 oracle_christoffel(const Spacetime& st, const SpacetimePoint& p) {
  const auto g = [&](const Vec4& x) {
    SpacetimePoint q{p.chart, x};
    return st.metric(q);
  };
  MetricJet jet;
  jet.g = g(p.coords);
  jet.dg = fd_metric_derivative6(g, p.coords, kInnerStep);
  const Mat4 gi = inverse_metric(jet.g);
  Rank3 G;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        double s = 0.0;
        for (int d = 0; d < 4; ++d) s += gi(a, d) * (jet.dg(d, c, b) + jet.dg(d, b, c) - jet.dg(b, c, d));
        G(a, b, c) = 0.5 * s;
      }
  return G;
}

}  // namespace

MetricData curvature_oracle(const Spacetime& st, const SpacetimePoint& p) {
  const Mat4 g = st.metric(p);
  const Rank3 G = oracle_christoffel(st, p);
  Rank4 dG;
  for (int e = 0; e < 4; ++e) {
    const double h = kOuterStep * (1.0 + std::abs(p.coords(e)));
    const Rank3 d = central6(
        [&](double s) {
          SpacetimePoint q = p;
          q.coords(e) += s;
          return Rank3(oracle_christoffel(st, q));
        },
        h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) dG(a, b, c, e) = d(a, b, c);
  }
  return assemble(g, G, dG);
}

double kretschmann_from(const MetricData& m) {
  const Mat4 gi = inverse_metric(m.g);
  // lower the first index, raise the other three
  Rank4 low;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          double s = 0.0;
          for (int e = 0; e < 4; ++e) s += m.g(a, e) * m.riemann(e, b, c, d);
          low(a, b, c, d) = s;
        }
  Rank4 up = m.riemann;
  // raise b, c, d one index at a time
  auto raise = [&](Rank4& t, int slot) {
    Rank4 out;
    out.setZero();
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          for (int d = 0; d < 4; ++d) {
            double s = 0.0;
            for (int e = 0; e < 4; ++e) {
              int idx[4] = {a, b, c, d};
              idx[slot] = e;
              const int free = slot == 1 ? b : slot == 2 ? c : d;
              s += gi(free, e) * t(idx[0], idx[1], idx[2], idx[3]);
            }
            out(a, b, c, d) = s;
          }
    t = out;
  };
  raise(up, 1);
  raise(up, 2);
  raise(up, 3);
  double k = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) k += low(a, b, c, d) * up(a, b, c, d);
  return k;
}

EnergyConditionReport energy_condition_report(const Spacetime& st, const SpacetimePoint& p, std::size_t n_samples,
                                              std::uint64_t seed, double rho_max) {
  if (n_samples < 1) throw std::invalid_argument("energy_condition_report: n_samples must be >= 1");
  const MetricData m = curvature(st, p);
  const Mat4 tau = st.tetrad(p);
  CounterStream rng(seed, 0x45430000u);
  EnergyConditionReport rep;
  rep.n_samples = n_samples;
  rep.rho_max = rho_max;
  rep.weak_min = rep.strong_min = rep.ric_tilde_min = std::numeric_limits<double>::infinity();
  rep.ric_tilde_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double rho = rho_max * rng.uniform();
    const Vec3 n = rng.unit_vector();
    Vec4 P;
    P << std::cosh(rho), std::sinh(rho) * n;
    const Vec4 u = tau * P;
    const double t = contract(m.energy_momentum, u);
    const double r = contract(m.ricci, u);
    rep.weak_min = std::min(rep.weak_min, t);
    rep.strong_min = std::min(rep.strong_min, r);
    rep.ric_tilde_min = std::min(rep.ric_tilde_min, r);
    rep.ric_tilde_max = std::max(rep.ric_tilde_max, r);
  }
  return rep;
}

bool has_lorentzian_signature(const Mat4& g) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (g + g.transpose()));
  int pos = 0, neg = 0;
  for (int i = 0; i < 4; ++i) {
    if (es.eigenvalues()(i) > 0) ++pos;
    if (es.eigenvalues()(i) < 0) ++neg;
  }
  return pos == 1 && neg == 3;
}

}  // namespace reldiff
