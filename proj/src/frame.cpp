#include "reldiff/frame.hpp"

#include <boost/math/interpolators/makima.hpp>
#include <fmt/format.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace reldiff {

Mat4 boost_generator(int j) {
  if (j < 1 || j > 3) throw std::out_of_range("boost generator index must be 1, 2 or 3");
  Mat4 E = Mat4::Zero();
  E(0, j) = E(j, 0) = 1.0;
  return E;
}

Mat4 boost_matrix(const Vec3& b) {
  const double beta = b.norm();
  if (beta == 0.0) return Mat4::Identity();
  const Vec3 n = b / beta;
  const double ch = std::cosh(beta), sh = std::sinh(beta);
  Mat4 B;
  B(0, 0) = ch;
  B.block<1, 3>(0, 1) = sh * n.transpose();
  B.block<3, 1>(1, 0) = sh * n;
  B.block<3, 3>(1, 1) = Mat3::Identity() + (ch - 1.0) * n * n.transpose();
  return B;
}

Mat4 boost_to(const Vec3& p) {
  const double g = std::sqrt(1.0 + p.squaredNorm());
  Mat4 B;
  B(0, 0) = g;
  B.block<1, 3>(0, 1) = p.transpose();
  B.block<3, 1>(1, 0) = p;
  B.block<3, 3>(1, 1) = Mat3::Identity() + p * p.transpose() / (g + 1.0);
  return B;
}

Mat3 project_to_so3(const Mat3& a) {
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthonormality_defect(const Spacetime& st, const Frame& f) {
  const Mat4 g = st.metric(f.point);
  return (f.e.transpose() * g * f.e - eta()).cwiseAbs().maxCoeff();
}

Frame reorthonormalize(const Spacetime& st, const Frame& f) {
  const Mat4 g = st.metric(f.point);
  Frame out = f;
  for (int pass = 0; pass < 2; ++pass) {
    Vec4 e0 = out.e.col(0);
    const double n0 = e0.dot(g * e0);
    if (!(n0 > 0.0)) throw DegenerateFrameError(fmt::format("e0 is not timelike (g(e0,e0) = {})", n0));
    out.e.col(0) = e0 / std::sqrt(n0);
    for (int j = 1; j < 4; ++j) {
      Vec4 v = out.e.col(j);
      for (int k = 0; k < j; ++k) {
        const Vec4 u = out.e.col(k);
        v -= (u.dot(g * v) * eta()(k, k)) * u;
      }
      const double n = v.dot(g * v);
      if (!(n < 0.0)) throw DegenerateFrameError(fmt::format("e{} is not spacelike after projection", j));
      out.e.col(j) = v / std::sqrt(-n);
    }
    if ((out.e.transpose() * g * out.e - eta()).cwiseAbs().maxCoeff() < 1e-14) break;
  }
  return out;
}

FrameTangent h0(const Spacetime& st, const Frame& f) {
  const Rank3 G = st.christoffel(f.point);
  FrameTangent t;
  t.dm = f.e.col(0);
  const Vec4 u = f.e.col(0);
  for (int m = 0; m < 4; ++m) {
    Vec4 row = Vec4::Zero();  // row(l) = Gamma^m_{n l} u^n
    for (int n = 0; n < 4; ++n)
      for (int l = 0; l < 4; ++l) row(l) += G(m, n, l) * u(n);
    for (int a = 0; a < 4; ++a) t.de(m, a) = -row.dot(f.e.col(a));
  }
  return t;
}

Frame vertical_flow(const Frame& f, const Vec3& b) {
  Frame out = f;
  out.e = f.e * boost_matrix(b);
  return out;
}

bool is_future_directed(const Spacetime& st, const Frame& f) {
  return st.time_orientation(f.point, f.e.col(0)) > 0.0;
}

namespace {

struct FrameState20 {
  Vec4 x;
  Mat4 e;
};

template <class Deriv>
Frame rk4(const Spacetime& st, const Frame& f, double ds, const Deriv& deriv) {
  auto at = [&](const Vec4& x, const Mat4& e) {
    Frame q;
    q.point.chart = f.point.chart;
    q.point.coords = x;
    q.e = e;
    return q;
  };
  try {
    const FrameTangent k1 = deriv(f, 0.0);
    const FrameTangent k2 = deriv(at(f.point.coords + 0.5 * ds * k1.dm, f.e + 0.5 * ds * k1.de), 0.5 * ds);
    const FrameTangent k3 = deriv(at(f.point.coords + 0.5 * ds * k2.dm, f.e + 0.5 * ds * k2.de), 0.5 * ds);
    const FrameTangent k4 = deriv(at(f.point.coords + ds * k3.dm, f.e + ds * k3.de), ds);
    Frame out = at(f.point.coords + ds / 6.0 * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm),
                   f.e + ds / 6.0 * (k1.de + 2.0 * k2.de + 2.0 * k3.de + k4.de));
    st.check_domain(out.point);
    return reorthonormalize(st, out);
  } catch (const DomainError& err) {
    throw StepRejected(fmt::format("step of size {} left the chart: {}", ds, err.what()));
  }
}

}  // namespace

Frame geodesic_flow(const Spacetime& st, const Frame& f, double ds) {
  return rk4(st, f, ds, [&](const Frame& q, double) { return h0(st, q); });
}

Frame geodesic_step(const Spacetime& st, const Frame& f, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("geodesic_step: ds must be > 0");
  return geodesic_flow(st, f, ds);
}

// ---------------------------------------------------------------- controls

struct Controls::Interp {
  using Makima = boost::math::interpolators::makima<std::vector<double>>;
  std::vector<Makima> comp;
};

Controls::Controls(std::vector<double> grid, std::vector<Vec3> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size()) throw std::invalid_argument("controls: grid and values differ in length");
  if (grid_.size() < 4) throw std::invalid_argument("controls: at least four samples are required");
  for (std::size_t i = 1; i < grid_.size(); ++i)
    if (!(grid_[i] > grid_[i - 1])) throw std::invalid_argument("controls: grid must be strictly increasing");
  if (!(grid_.back() > 0.0)) throw std::invalid_argument("controls: horizon must be positive");
  auto in = std::make_shared<Interp>();
  for (int j = 0; j < 3; ++j) {
    std::vector<double> x = grid_, y(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) y[i] = values_[i](j);
    in->comp.emplace_back(std::move(x), std::move(y));
  }
  interp_ = std::move(in);
}

Vec3 Controls::operator()(double s) const {
  if (!interp_) return Vec3::Zero();
  s = std::clamp(s, grid_.front(), grid_.back());
  return {interp_->comp[0](s), interp_->comp[1](s), interp_->comp[2](s)};
}

Controls Controls::constant(const Vec3& h, double T, double dt) {
  const auto n = static_cast<std::size_t>(std::max(3.0, std::ceil(T / dt)));
  std::vector<double> grid(n + 1);
  std::vector<Vec3> vals(n + 1, h);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = T * static_cast<double>(i) / static_cast<double>(n);
  return Controls(std::move(grid), std::move(vals));
}

std::vector<std::pair<double, Frame>> develop(const Spacetime& st, const Controls& c, const Frame& f0, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("develop: ds must be > 0");
  const auto& grid = c.grid();
  if (grid.empty()) throw std::invalid_argument("develop: empty controls");
  std::vector<std::pair<double, Frame>> out;
  out.reserve(grid.size());
  Frame f = f0;
  double s = grid.front();
  out.emplace_back(s, f);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double span = grid[i] - grid[i - 1];
    const int n = std::max(1, static_cast<int>(std::ceil(span / ds - 1e-9)));
    const double h = span / n;
    for (int k = 0; k < n; ++k) {
      const double s0 = s;
      f = rk4(st, f, h, [&](const Frame& q, double off) {
        FrameTangent t = h0(st, q);
        const Vec3 hv = c(s0 + off);
        Mat4 K = Mat4::Zero();
        for (int j = 1; j <= 3; ++j) K += hv(j - 1) * boost_generator(j);
        t.de += q.e * K;
        return t;
      });
      s = grid[i - 1] + (k + 1) * h;
    }
    s = grid[i];
    out.emplace_back(s, f);
  }
  return out;
}

namespace {

// Value and first derivative at x of the Lagrange polynomial through (xs, ys).
template <class T>
std::pair<T, T> lagrange(const std::vector<double>& xs, const std::vector<T>& ys, std::size_t lo, std::size_t n,
                         double x) {
  T val = ys[lo] * 0.0, der = ys[lo] * 0.0;
  for (std::size_t i = lo; i < lo + n; ++i) {
    double li = 1.0;
    for (std::size_t j = lo; j < lo + n; ++j)
      if (j != i) li *= (x - xs[j]) / (xs[i] - xs[j]);
    double dli = 0.0;
    for (std::size_t k = lo; k < lo + n; ++k) {
      if (k == i) continue;
      double term = 1.0 / (xs[i] - xs[k]);
      for (std::size_t j = lo; j < lo + n; ++j)
        if (j != i && j != k) term *= (x - xs[j]) / (xs[i] - xs[j]);
      dli += term;
    }
    val = val + li * ys[i];
    der = der + dli * ys[i];
  }
  return {val, der};
}

std::size_t window(std::size_t i, std::size_t size, std::size_t n) {
  const std::size_t half = n / 2;
  if (i < half) return 0;
  if (i + n - half > size) return size - n;
  return i - half;
}

}  // namespace

Controls anti_develop(const Spacetime& st, const std::vector<PathSample>& path, const Frame& f0) {
  const std::size_t N = path.size();
  if (N < 5) throw std::invalid_argument("anti_develop: at least five path samples are required");
  std::vector<double> s(N);
  std::vector<Mat4> lift(N);
  for (std::size_t i = 0; i < N; ++i) {
    s[i] = path[i].s;
    if (i > 0 && !(s[i] > s[i - 1])) throw std::invalid_argument("anti_develop: path times must increase");
    const Mat4 g = st.metric(path[i].point);
    const Vec4& u = path[i].velocity;
    const double n = u.dot(g * u);
    if (std::abs(n - 1.0) > 1e-6)
      throw std::invalid_argument(fmt::format("anti_develop: path is not unit-speed timelike at s = {} (g(u,u) = {})",
                                              s[i], n));
    if (st.time_orientation(path[i].point, u) <= 0.0)
      throw std::invalid_argument(fmt::format("anti_develop: velocity not future-directed at s = {}", s[i]));
    Frame q;
    q.point = path[i].point;
    q.e = f0.e;
    q.e.col(0) = u;
    lift[i] = reorthonormalize(st, q).e;
  }
  if ((f0.point.coords - path[0].point.coords).cwiseAbs().maxCoeff() > 1e-10 || f0.point.chart != path[0].point.chart)
    throw std::invalid_argument("anti_develop: f0 is not based at the start of the path");
  if ((f0.e.col(0) - path[0].velocity).cwiseAbs().maxCoeff() > 1e-6)
    throw std::invalid_argument("anti_develop: f0's e0 differs from the initial velocity");

  // Connection form of the lift: w = lift^{-1} (d lift/ds + Gamma(u, lift)).
  std::vector<Vec3> kvec(N);
  std::vector<Mat3> omega(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t lo = window(i, N, 5);
    const Mat4 de = lagrange(s, lift, lo, 5, s[i]).second;
    Frame q;
    q.point = path[i].point;
    q.e = lift[i];
    const FrameTangent t = h0(st, q);
    // h0 gives -Gamma(e0, e_a); the lift is transported along u = e0.
    const Mat4 w = lift[i].inverse() * (de - t.de);
    kvec[i] = 0.5 * (Vec3(w(1, 0), w(2, 0), w(3, 0)) + Vec3(w(0, 1), w(0, 2), w(0, 3)));
    const Mat3 r = w.block<3, 3>(1, 1);
    omega[i] = 0.5 * (r - r.transpose());
  }

  // dA/ds = -Omega A with A(0) from f0 = lift(0) diag(1, A0).
  const Mat4 rel = lift[0].inverse() * f0.e;
  Mat3 A = project_to_so3(rel.block<3, 3>(1, 1));
  if ((rel.block<3, 3>(1, 1) - A).cwiseAbs().maxCoeff() > 1e-6)
    throw std::invalid_argument("anti_develop: f0 does not project onto the path's initial velocity");
  auto omega_at = [&](double x, std::size_t i) {
    const std::size_t lo = window(i, N, 4);
    return lagrange(s, omega, lo, 4, x).first;
  };
  std::vector<Vec3> h(N);
  h[0] = A.transpose() * kvec[0];
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const double dt = s[i + 1] - s[i];
    const Mat3 Om0 = omega[i], Om1 = omega_at(s[i] + 0.5 * dt, i), Om2 = omega[i + 1];
    const Mat3 k1 = -Om0 * A;
    const Mat3 k2 = -Om1 * (A + 0.5 * dt * k1);
    const Mat3 k3 = -Om1 * (A + 0.5 * dt * k2);
    const Mat3 k4 = -Om2 * (A + dt * k3);
    A = project_to_so3(A + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    h[i + 1] = A.transpose() * kvec[i + 1];
  }
  std::vector<double> grid(N);
  for (std::size_t i = 0; i < N; ++i) grid[i] = s[i] - s[0];
  return Controls(std::move(grid), std::move(h));
}

// ---------------------------------------------------------------- presets

Frame tetrad_frame(const Spacetime& st, const SpacetimePoint& p) {
  Frame f;
  f.point = p;
  f.e = st.tetrad(p);
  return f;
}

Frame frame_with_velocity(const Spacetime& st, const SpacetimePoint& p, const Vec4& u) {
  const Mat4 tau = st.tetrad(p);
  const Vec4 P = tau.inverse() * u;
  if (!(P(0) > 0.0)) throw DegenerateFrameError("frame_with_velocity: velocity is not future-directed");
  if (std::abs(P(0) * P(0) - P.tail<3>().squaredNorm() - 1.0) > 1e-8 * P(0) * P(0))
    throw DegenerateFrameError("frame_with_velocity: velocity is not unit timelike");
  Frame f;
  f.point = p;
  f.e = tau * boost_to(P.tail<3>());
  f.e.col(0) = u;
  return reorthonormalize(st, f);
}

Frame static_observer_frame(const Spacetime& st, const SpacetimePoint& p) {
  if (st.id() != "schwarzschild") throw std::invalid_argument("static observer frames are defined for schwarzschild");
  const double M = st.parameters().at("M");
  const double r = p.coords(1);
  if (!(r > 2.0 * M)) throw DomainError("static observer requires r > 2M");
  const double f = 1.0 - 2.0 * M / r;
  Frame out;
  out.point = p;
  out.e.setZero();
  out.e(0, 0) = 1.0 / std::sqrt(f);
  out.e(0, 1) = 1.0 / std::sqrt(f);
  out.e(1, 1) = std::sqrt(f);
  out.e(2, 2) = 1.0 / r;
  out.e(3, 3) = 1.0 / (r * std::sin(p.coords(2)));
  return out;
}

Frame circular_orbit_frame(const Spacetime& st, double r, double v0, double phi0) {
  if (st.id() != "schwarzschild") throw std::invalid_argument("circular orbits are defined for schwarzschild");
  const double M = st.parameters().at("M");
  if (!(r > 3.0 * M)) throw std::invalid_argument("circular orbits require r > 3M");
  const double k = 1.0 / std::sqrt(1.0 - 3.0 * M / r);
  SpacetimePoint p{0, Vec4(v0, r, M_PI / 2, phi0)};
  const Vec4 u(k, 0.0, 0.0, std::sqrt(M / (r * r * r)) * k);
  return frame_with_velocity(st, p, u);
}

}  // namespace reldiff
