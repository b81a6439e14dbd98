#include "reldiff/diffusion.hpp"

#include "reldiff/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace reldiff {

void DiffusionConfig::validate() const {
  auto bad = [](const char* field, double v, const char* rule) {
    throw std::invalid_argument(fmt::format("diffusion.{} = {} violates {}", field, v, rule));
  };
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) bad("sigma", sigma, "sigma >= 0");
  if (!(ds > 0.0) || !std::isfinite(ds)) bad("ds", ds, "ds > 0");
  if (!(s_max > 0.0) || !std::isfinite(s_max)) bad("s_max", s_max, "s_max > 0");
  if (ds > s_max) bad("ds", ds, "ds <= s_max");
  if (!(explosion.coord_bound > 0.0)) bad("coord_bound", explosion.coord_bound, "coord_bound > 0");
  if (!(explosion.curvature_bound > 0.0)) bad("curvature_bound", explosion.curvature_bound, "curvature_bound > 0");
  if (!(explosion.min_step > 0.0)) bad("min_step", explosion.min_step, "min_step > 0");
  if (!(explosion.chart_exit_scale > 0.0)) bad("chart_exit_scale", explosion.chart_exit_scale, "chart_exit_scale > 0");
  if (output_stride < 1) bad("output_stride", output_stride, "output_stride >= 1");
  if (trajectory_index > 0xFFFFFFFFull) bad("trajectory_index", double(trajectory_index), "trajectory_index < 2^32");
}

std::string to_string(Termination t) { return t == Termination::BudgetExhausted ? "BudgetExhausted" : "Exploded"; }

std::string to_string(ExplosionReason r) {
  switch (r) {
    case ExplosionReason::None: return "None";
    case ExplosionReason::CoordBound: return "CoordBound";
    case ExplosionReason::CurvatureBound: return "CurvatureBound";
    case ExplosionReason::StepCollapse: return "StepCollapse";
    case ExplosionReason::ChartExit: return "ChartExit";
  }
  return "None";
}

std::string verdict_string(Termination t, ExplosionReason r) {
  return t == Termination::BudgetExhausted ? "BudgetExhausted" : "Exploded(" + to_string(r) + ")";
}

FrameState to_state(const Spacetime& st, const Frame& f) {
  const Mat4 tau = st.tetrad(f.point);
  const Mat4 L = tau.inverse() * f.e;
  FrameState s;
  s.point = f.point;
  s.p = L.block<3, 1>(1, 0);
  if (!(L(0, 0) > 0.0)) throw DegenerateFrameError("frame is not future-directed");
  const Mat4 rest = boost_to(-s.p) * L;
  const Mat3 R = project_to_so3(rest.block<3, 3>(1, 1));
  if ((rest.block<3, 3>(1, 1) - R).cwiseAbs().maxCoeff() > 1e-6)
    throw DegenerateFrameError("frame is not orthonormal and direct");
  s.rot = Eigen::Quaterniond(R);
  s.rot.normalize();
  return s;
}

Frame to_frame(const Spacetime& st, const FrameState& s) {
  Frame f;
  f.point = s.point;
  f.e = st.tetrad(s.point) * boost_to(s.p) * embed_rotation(s.rot.toRotationMatrix());
  return f;
}

double structural_defect(const Spacetime& st, const FrameState& s) {
  const Mat4 tau = st.tetrad(s.point);
  const double dt = (tau.transpose() * st.metric(s.point) * tau - eta()).cwiseAbs().maxCoeff();
  return std::max(dt, std::abs(s.rot.squaredNorm() - 1.0));
}

FrameState vertical_step(const FrameState& s, const Vec3& b) {
  const double beta = b.norm();
  if (beta == 0.0) return s;
  const Vec3 dir = s.rot * (b / beta);
  const Vec3 q = std::sinh(beta) * dir;
  const double gq = std::cosh(beta);
  const double g = s.gamma();
  const double pq = s.p.dot(q);
  FrameState out = s;
  out.p = q + gq * s.p + (pq / (g + 1.0)) * s.p;
  // Wigner rotation of the composed boost, pre-scaled by 1/(1+g) against overflow
  const Vec3 v = -s.p.cross(q) / (1.0 + g);
  Eigen::Quaterniond w((1.0 + gq) + pq / (1.0 + g), v.x(), v.y(), v.z());
  w.normalize();
  out.rot = w * s.rot;
  out.rot.normalize();
  return out;
}

namespace {

struct Deriv {
  Vec4 dx;
  Vec3 dp;
  Vec3 xi;  // angular velocity of the rotation factor, applied on the left
};

Deriv horizontal_rhs(const Spacetime& st, const SpacetimePoint& pt, const Vec3& p) {
  const double g = std::hypot(1.0, p.stableNorm());
  Vec4 P;
  P << g, p;
  Vec3 a, w;
  st.connection_form(pt, P, a, w);
  Deriv d;
  d.dx = st.tetrad(pt) * P;
  d.dp = -(g * a + w.cross(p));
  d.xi = -w - p.cross(a) / (g + 1.0);
  return d;
}

Eigen::Quaterniond apply_rate(const Eigen::Quaterniond& q, const Vec3& xi, double h) {
  // q + h * 0.5 * (0, xi) q
  const Eigen::Quaterniond om(0.0, xi.x(), xi.y(), xi.z());
  Eigen::Quaterniond d = om * q;
  return Eigen::Quaterniond(q.w() + 0.5 * h * d.w(), q.x() + 0.5 * h * d.x(), q.y() + 0.5 * h * d.y(),
                            q.z() + 0.5 * h * d.z());
}

}  // namespace

FrameState horizontal_step(const Spacetime& st, const FrameState& s, double ds) {
  try {
    SpacetimePoint pt = s.point;
    const Deriv k1 = horizontal_rhs(st, pt, s.p);
    pt.coords = s.point.coords + 0.5 * ds * k1.dx;
    const Deriv k2 = horizontal_rhs(st, pt, s.p + 0.5 * ds * k1.dp);
    pt.coords = s.point.coords + 0.5 * ds * k2.dx;
    const Deriv k3 = horizontal_rhs(st, pt, s.p + 0.5 * ds * k2.dp);
    pt.coords = s.point.coords + ds * k3.dx;
    const Deriv k4 = horizontal_rhs(st, pt, s.p + ds * k3.dp);

    FrameState out;
    out.point.chart = s.point.chart;
    out.point.coords = s.point.coords + ds / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    out.p = s.p + ds / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    // RK4 on the quaternion with stage rotations
    const Eigen::Quaterniond q1 = s.rot;
    const Eigen::Quaterniond q2 = apply_rate(s.rot, k1.xi, 0.5 * ds);
    const Eigen::Quaterniond q3 = apply_rate(s.rot, k2.xi, 0.5 * ds);
    const Eigen::Quaterniond q4 = apply_rate(s.rot, k3.xi, ds);
    auto rate = [](const Eigen::Quaterniond& q, const Vec3& xi) -> Eigen::Vector4d {
      return (Eigen::Quaterniond(0.0, xi.x(), xi.y(), xi.z()) * q).coeffs() * 0.5;
    };
    const Eigen::Vector4d dq = rate(q1, k1.xi) + 2.0 * rate(q2, k2.xi) + 2.0 * rate(q3, k3.xi) + rate(q4, k4.xi);
    out.rot.coeffs() = s.rot.coeffs() + ds / 6.0 * dq;
    out.rot.normalize();
    st.check_domain(out.point);
    if (!out.point.coords.allFinite() || !out.p.allFinite())
      throw StepRejected(fmt::format("step of size {} produced non-finite values", ds));
    return out;
  } catch (const DomainError& err) {
    throw StepRejected(fmt::format("step of size {} left the chart: {}", ds, err.what()));
  }
}

FrameState split_step(const Spacetime& st, const FrameState& s, double sigma, double ds, const Vec3& dW) {
  const Vec3 half = 0.5 * sigma * dW;
  return vertical_step(horizontal_step(st, vertical_step(s, half), ds), half);
}

Frame step(const Spacetime& st, const Frame& f, const DiffusionConfig& cfg, const Vec3& dW) {
  const Vec3 half = 0.5 * cfg.sigma * dW;
  return vertical_flow(geodesic_step(st, vertical_flow(f, half), cfg.ds), half);
}

namespace {

class Runner {
 public:
  Runner(const Spacetime& st, const DiffusionConfig& cfg, const SimulateOptions& opts, bool flat_shortcut)
      : st_(st), cfg_(cfg), opts_(opts), flat_(flat_shortcut) {
    const double L = st.length_scale();
    kretschmann_limit_ = cfg.explosion.curvature_bound / (L * L * L * L);
  }

  Trajectory run(const Frame& f0) {
    cfg_.validate();
    Trajectory tr;
    FrameState s = to_state(st_, f0);
    double t = 0.0;
    record(tr, t, s, true);
    if (opts_.observer && !opts_.observer(t, s)) return finish(tr, s, t);
    // step k covers [k ds, min((k + 1) ds, s_max)]; times are products, never sums
    std::uint64_t k = 0;
    const double tol = 1e-9 * cfg_.ds;
    while (double(k) * cfg_.ds < cfg_.s_max - tol) {
      const double t0 = double(k) * cfg_.ds;
      const bool last = t0 + cfg_.ds > cfg_.s_max - tol;
      const double h = last && cfg_.s_max - t0 < cfg_.ds - tol ? cfg_.s_max - t0 : cfg_.ds;
      const Vec3 dW = noise_increment(cfg_.seed, cfg_.trajectory_index, k, h);
      double reached = t0;
      const ExplosionReason r = advance(tr, s, reached, h, dW);
      ++k;
      tr.steps = k;
      if (r != ExplosionReason::None) {
        t = reached;
        tr.termination = Termination::Exploded;
        tr.reason = r;
        record(tr, t, s, true);
        return finish(tr, s, t);
      }
      t = last ? cfg_.s_max : double(k) * cfg_.ds;
      record(tr, t, s, k % static_cast<std::uint64_t>(cfg_.output_stride) == 0);
      if (opts_.observer && !opts_.observer(t, s)) return finish(tr, s, t);
    }
    record(tr, t, s, tr.samples.empty() || tr.samples.back().s != t);
    return finish(tr, s, t);
  }

 private:
  Trajectory& finish(Trajectory& tr, const FrameState& s, double t) {
    tr.zeta = t;
    tr.final_state = s;
    return tr;
  }

  void record(Trajectory& tr, double t, const FrameState& s, bool due) {
    if (!opts_.record || !due) return;
    if (!tr.samples.empty() && tr.samples.back().s == t) return;
    tr.samples.push_back({t, to_frame(st_, s), structural_defect(st_, s)});
  }

  FrameState one(const FrameState& s, double h, const Vec3& dW) const {
    if (!flat_) return split_step(st_, s, cfg_.sigma, h, dW);
    const Vec3 half = 0.5 * cfg_.sigma * dW;
    FrameState a = vertical_step(s, half);
    a.point.coords += h * Vec4(a.gamma(), a.p.x(), a.p.y(), a.p.z());
    return vertical_step(a, half);
  }

  ExplosionReason check(const FrameState& s) const {
    if (st_.in_exit_region(s.point, cfg_.explosion.chart_exit_scale)) return ExplosionReason::ChartExit;
    if (s.point.coords.cwiseAbs().maxCoeff() > cfg_.explosion.coord_bound) return ExplosionReason::CoordBound;
    if (!flat_ && st_.kretschmann(s.point) > kretschmann_limit_) return ExplosionReason::CurvatureBound;
    return ExplosionReason::None;
  }

  // Advances by h, halving on rejection with the increment split equally.
  ExplosionReason advance(Trajectory& tr, FrameState& s, double& t, double h, const Vec3& dW) {
    try {
      s = one(s, h, dW);
    } catch (const StepRejected&) {
      if (h / 2 < cfg_.explosion.min_step) return ExplosionReason::StepCollapse;
      ++tr.halvings;
      const ExplosionReason r = advance(tr, s, t, h / 2, dW / 2);
      if (r != ExplosionReason::None) return r;
      return advance(tr, s, t, h / 2, dW / 2);
    }
    t += h;
    if (auto mv = st_.chart_transition(s.point)) {
      const Mat4 tau_old = st_.tetrad(s.point);
      const Mat4 tau_new = st_.tetrad(mv->point);
      const Mat4 L = tau_new.inverse() * mv->jacobian * tau_old;
      const Mat3 L3 = project_to_so3(L.block<3, 3>(1, 1));
      tr.transitions.push_back({t, s.point.chart, mv->point.chart});
      s.point = mv->point;
      s.p = L3 * s.p;
      s.rot = Eigen::Quaterniond(L3) * s.rot;
      s.rot.normalize();
    }
    return check(s);
  }

  const Spacetime& st_;
  DiffusionConfig cfg_;
  const SimulateOptions& opts_;
  bool flat_;
  double kretschmann_limit_;
};

}  // namespace

Trajectory simulate(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0, const SimulateOptions& opts) {
  return Runner(st, cfg, opts, false).run(f0);
}

Trajectory dudley_simulate(const DiffusionConfig& cfg, const Frame& f0, const SimulateOptions& opts) {
  static const SpacetimePtr mk = make_spacetime("minkowski");
  return Runner(*mk, cfg, opts, true).run(f0);
}

}  // namespace reldiff
