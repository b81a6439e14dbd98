#include "reldiff/montecarlo.hpp"
#include "reldiff/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace reldiff {

WilsonInterval wilson_interval(std::size_t k, std::size_t n, double level) {
  if (n == 0) return {0.0, 1.0};
  if (k > n) throw std::invalid_argument("wilson_interval: more successes than trials");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  const double nn = double(n), p = double(k) / nn, z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  // exact endpoints at k = 0 and k = n
  return {k == 0 ? 0.0 : std::max(0.0, centre - half), k == n ? 1.0 : std::min(1.0, centre + half)};
}

Trajectory run_path(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0, std::uint64_t index,
                    const SimulateOptions& opts) {
  DiffusionConfig c = cfg;
  c.trajectory_index = index;
  if (st.is_flat() && st.id() == "minkowski") return dudley_simulate(c, f0, opts);
  return simulate(st, c, f0, opts);
}

void parallel_paths(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  // lets an explicit worker count exceed the hardware concurrency
  std::optional<tbb::global_control> limit;
  if (threads > 0) limit.emplace(tbb::global_control::max_allowed_parallelism, std::size_t(threads));
  tbb::task_arena arena(threads > 0 ? threads : tbb::task_arena::automatic);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
    });
  });
}

namespace {

void require_paths(std::size_t n) {
  if (n == 0) throw std::invalid_argument("n_paths: must be at least 1");
}

void report_progress(const EnsembleOptions& opts, std::size_t n) {
  if (opts.progress) opts.progress(n, n);
}

// Type 7 sample quantile.
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (double(v.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ExplosionReport estimate_explosion(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0,
                                   std::size_t n_paths, std::vector<double> sweep, const EnsembleOptions& opts) {
  require_paths(n_paths);
  cfg.validate();
  if (sweep.empty())
    for (double d : {16.0, 8.0, 4.0, 2.0, 1.0}) sweep.push_back(cfg.s_max / d);
  for (double s : sweep)
    if (!(s > 0.0 && s <= cfg.s_max)) throw std::invalid_argument(fmt::format("sweep: {} outside (0, s_max]", s));
  std::sort(sweep.begin(), sweep.end());

  std::vector<Trajectory> runs(n_paths);
  parallel_paths(n_paths, opts.threads, [&](std::size_t i) { runs[i] = run_path(st, cfg, f0, i); });
  report_progress(opts, n_paths);

  ExplosionReport rep;
  rep.spacetime = st.id();
  rep.n_paths = n_paths;
  rep.s_max = cfg.s_max;
  rep.config = cfg;
  rep.initial = f0;
  rep.caveat =
      "p_hat estimates P(zeta <= s_max), a lower bound on P(zeta < infinity); explosion mass may also sit at "
      "small times, which the sweep resolves";
  for (const Trajectory& tr : runs) {
    if (tr.termination == Termination::Exploded) {
      rep.zeta_samples.push_back(tr.zeta);
      ++rep.reasons[to_string(tr.reason)];
    } else {
      ++rep.n_completed;
    }
  }
  rep.n_exploded = rep.zeta_samples.size();
  rep.p_hat = double(rep.n_exploded) / double(n_paths);
  const WilsonInterval ci = wilson_interval(rep.n_exploded, n_paths);
  rep.ci_low = ci.low;
  rep.ci_high = ci.high;
  for (double s : sweep) {
    SweepPoint p;
    p.s_max = s;
    p.n_exploded = std::size_t(std::count_if(rep.zeta_samples.begin(), rep.zeta_samples.end(),
                                             [&](double z) { return z <= s; }));
    p.p_hat = double(p.n_exploded) / double(n_paths);
    const WilsonInterval w = wilson_interval(p.n_exploded, n_paths);
    p.ci_low = w.low;
    p.ci_high = w.high;
    rep.sweep.push_back(p);
  }
  return rep;
}

MomentCurve exponential_moment(const Spacetime& st, const FiberFunctional& F, const DiffusionConfig& cfg,
                               const Frame& f0, std::size_t n_paths, const std::vector<double>& times,
                               const EnsembleOptions& opts) {
  require_paths(n_paths);
  cfg.validate();
  // scheduled times as the integrator produces them: k * ds, or s_max itself
  std::vector<double> grid;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (!(t >= 0.0 && t <= cfg.s_max * (1 + 1e-12)))
      throw std::invalid_argument(fmt::format("times: {} outside [0, s_max]", t));
    if (i > 0 && !(t > times[i - 1])) throw std::invalid_argument("times: must be increasing");
    const double k = std::round(t / cfg.ds);
    if (std::abs(k * cfg.ds - t) <= 1e-9 * std::max(cfg.ds, t))
      grid.push_back(k * cfg.ds);
    else if (std::abs(t - cfg.s_max) <= 1e-12 * cfg.s_max)
      grid.push_back(cfg.s_max);
    else
      throw std::invalid_argument(fmt::format("times: {} is not on the step grid of ds = {}", t, cfg.ds));
  }
  const std::size_t m = grid.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> vals(n_paths * m, nan);

  parallel_paths(n_paths, opts.threads, [&](std::size_t i) {
    std::size_t next = 0;
    SimulateOptions so{false, [&](double t, const FrameState& s) {
                         while (next < m && std::abs(t - grid[next]) <= 1e-9 * cfg.ds) {
                           vals[i * m + next] = F(to_frame(st, s));
                           ++next;
                         }
                         return next < m;
                       }};
    run_path(st, cfg, f0, i, so);
  });
  report_progress(opts, n_paths);

  MomentCurve mc;
  mc.functional = F.name;
  mc.times = times;
  mc.n_paths = n_paths;
  mc.initial_value = F(f0);
  for (std::size_t j = 0; j < m; ++j) {
    double sum = 0.0;
    std::size_t alive = 0;
    for (std::size_t i = 0; i < n_paths; ++i) {
      const double v = vals[i * m + j];
      if (std::isnan(v)) continue;
      sum += v;
      ++alive;
    }
    const double mean = alive > 0 ? sum / double(alive) : nan;
    double ss = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
      const double v = vals[i * m + j];
      if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    mc.means.push_back(mean);
    mc.std_errors.push_back(alive > 1 ? std::sqrt(ss / double(alive - 1) / double(alive)) : 0.0);
    mc.n_alive.push_back(alive);
    mc.censored.push_back(n_paths - alive);
  }
  return mc;
}

Region region_r_below(double value) {
  return {fmt::format("r <= {}", value), [value](const Frame& f) { return f.point.coords(1) <= value; }};
}

Region region_empty() {
  return {"empty", [](const Frame&) { return false; }};
}

HittingReport hitting_stats(const Spacetime& st, const DiffusionConfig& cfg, const Frame& f0, std::size_t n_paths,
                            const Region& region, const Region* entry, const EnsembleOptions& opts) {
  require_paths(n_paths);
  cfg.validate();
  struct Outcome {
    bool entered = false;
    bool hit = false;
    double t_entry = 0.0;
    double t_hit = 0.0;
    Termination termination = Termination::BudgetExhausted;
  };
  std::vector<Outcome> out(n_paths);

  parallel_paths(n_paths, opts.threads, [&](std::size_t i) {
    Outcome& o = out[i];
    o.entered = entry == nullptr;
    auto visit = [&](double t, const Frame& f) {
      if (!o.entered && entry->contains(f)) {
        o.entered = true;
        o.t_entry = t;
      }
      if (o.entered && region.contains(f)) {
        o.hit = true;
        o.t_hit = t;
      }
      return !o.hit;
    };
    SimulateOptions so{false, [&](double t, const FrameState& s) { return visit(t, to_frame(st, s)); }};
    const Trajectory tr = run_path(st, cfg, f0, i, so);
    // the state at explosion is not passed to the observer
    if (!o.hit && tr.termination == Termination::Exploded) visit(tr.zeta, to_frame(st, tr.final_state));
    o.termination = tr.termination;
  });
  report_progress(opts, n_paths);

  HittingReport rep;
  rep.region = region.name;
  rep.entry = entry ? entry->name : "";
  rep.n_paths = n_paths;
  rep.s_max = cfg.s_max;
  rep.config = cfg;
  for (const Outcome& o : out) {
    if (o.entered) ++rep.n_entered;
    if (o.hit) {
      rep.hit_times.push_back(o.t_hit - o.t_entry);
    } else if (o.termination == Termination::Exploded) {
      ++rep.n_exploded;
    } else {
      ++rep.n_completed;
    }
  }
  rep.n_hit = rep.hit_times.size();
  rep.p_hit = double(rep.n_hit) / double(n_paths);
  const WilsonInterval ci = wilson_interval(rep.n_hit, n_paths);
  rep.ci_low = ci.low;
  rep.ci_high = ci.high;
  for (double q : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0})
    rep.quantiles[fmt::format("{:g}", q)] = quantile(rep.hit_times, q);
  return rep;
}

// ------------------------------------------------------------ tube

TubeChart::TubeChart(SpacetimePtr st, std::vector<std::pair<double, Frame>> core, double radius)
    : st_(std::move(st)), core_(std::move(core)), radius_(radius) {
  if (!st_) throw std::invalid_argument("tube: null spacetime");
  if (core_.size() < 2) throw std::invalid_argument("tube: core needs at least two samples");
  if (!(radius > 0.0)) throw std::invalid_argument("tube: radius must be positive");
  h_ = core_[1].first - core_[0].first;
  if (core_.front().first != 0.0 || !(h_ > 0.0)) throw std::invalid_argument("tube: core must start at s = 0");
  for (std::size_t k = 0; k < core_.size(); ++k) {
    if (std::abs(core_[k].first - double(k) * h_) > 1e-9 * h_ * double(k + 1))
      throw std::invalid_argument("tube: core samples must be uniformly spaced");
    if (core_[k].second.point.chart != core_[0].second.point.chart)
      throw std::invalid_argument("tube: core must stay in one chart");
  }
}

Frame TubeChart::core_frame(double s) const {
  const double T = length();
  if (s < 0.0) return geodesic_flow(*st_, core_.front().second, s);
  if (s > T) return geodesic_flow(*st_, core_.back().second, s - T);
  const std::size_t k = std::min(static_cast<std::size_t>(s / h_), core_.size() - 2);
  const double w = (s - core_[k].first) / h_;
  const Frame& a = core_[k].second;
  const Frame& b = core_[k + 1].second;
  if (w == 0.0) return a;
  Frame f;
  f.point.chart = a.point.chart;
  f.point.coords = (1 - w) * a.point.coords + w * b.point.coords;
  f.e = (1 - w) * a.e + w * b.e;
  return reorthonormalize(*st_, f);
}

SpacetimePoint TubeChart::map(double s, const Vec3& x) const {
  const Frame f = core_frame(s);
  const Vec4 v0 = f.e.rightCols<3>() * x;
  if (st_->is_flat() && st_->id() == "minkowski") return {f.point.chart, f.point.coords + v0};
  // spacelike geodesic y'' = -Gamma(y', y') over unit affine length
  const int n = 16;
  const double h = 1.0 / n;
  SpacetimePoint p = f.point;
  Vec4 v = v0;
  auto acc = [&](const Vec4& y, const Vec4& u) {
    const Rank3 G = st_->christoffel({p.chart, y});
    Vec4 a = Vec4::Zero();
    for (int i = 0; i < 4; ++i)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) a(i) -= G(i, b, c) * u(b) * u(c);
    return a;
  };
  for (int k = 0; k < n; ++k) {
    const Vec4 y = p.coords;
    const Vec4 k1x = v, k1v = acc(y, v);
    const Vec4 k2x = v + 0.5 * h * k1v, k2v = acc(y + 0.5 * h * k1x, k2x);
    const Vec4 k3x = v + 0.5 * h * k2v, k3v = acc(y + 0.5 * h * k2x, k3x);
    const Vec4 k4x = v + h * k3v, k4v = acc(y + h * k3x, k4x);
    p.coords = y + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  st_->check_domain(p);
  return p;
}

namespace {

Mat4 tube_jacobian(const TubeChart& tube, double s, const Vec3& x) {
  const double h = 1e-6 * std::max(1.0, tube.radius());
  Mat4 J;
  for (int j = 0; j < 4; ++j) {
    double sp = s, sm = s;
    Vec3 xp = x, xm = x;
    if (j == 0) {
      sp += h;
      sm -= h;
    } else {
      xp(j - 1) += h;
      xm(j - 1) -= h;
    }
    J.col(j) = (tube.map(sp, xp).coords - tube.map(sm, xm).coords) / (2 * h);
  }
  return J;
}

}  // namespace

bool TubeChart::invert(const SpacetimePoint& p, double& s, Vec3& x) const {
  if (p.chart != core_.front().second.point.chart) return false;
  for (int it = 0; it < 40; ++it) {
    const Vec4 r = map(s, x).coords - p.coords;
    const Vec4 d = tube_jacobian(*this, s, x).partialPivLu().solve(r);
    if (!d.allFinite()) return false;
    s -= d(0);
    x -= d.tail<3>();
    if (d.norm() <= 1e-12 * (1.0 + std::abs(s) + x.norm())) return true;
  }
  return false;
}

void TubeChart::check_injective(int n_samples, std::uint64_t seed) const {
  CounterStream rng(seed, 0x54554245);
  const double T = length();
  try {
    const double det0 = tube_jacobian(*this, 0.5 * T, Vec3::Zero()).determinant();
    for (int i = 0; i < n_samples; ++i) {
      const double s = T * rng.uniform();
      const Vec3 x = radius_ * std::cbrt(rng.uniform()) * rng.unit_vector();
      const double det = tube_jacobian(*this, s, x).determinant();
      if (!(det / det0 > 1e-6))
        throw TubeTooWide(fmt::format("tube radius {} too wide: chart degenerates at s = {}, x = ({}, {}, {})", radius_,
                                      s, x(0), x(1), x(2)));
      double s1 = s;
      Vec3 x1 = Vec3::Zero();
      if (!invert(map(s, x), s1, x1) || std::abs(s1 - s) + (x1 - x).norm() > 1e-6 * (1.0 + radius_))
        throw TubeTooWide(fmt::format("tube radius {} too wide: chart not injective at s = {}, x = ({}, {}, {})",
                                      radius_, s, x(0), x(1), x(2)));
    }
  } catch (const DomainError& e) {
    throw TubeTooWide(fmt::format("tube radius {} too wide: {}", radius_, e.what()));
  }
}

std::vector<std::pair<double, Frame>> geodesic_core(const Spacetime& st, const Frame& f0, double T, double ds) {
  if (!(T > 0.0 && ds > 0.0)) throw std::invalid_argument("geodesic_core: T and ds must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(T / ds - 1e-9));
  const double h = T / double(n);
  std::vector<std::pair<double, Frame>> core{{0.0, f0}};
  for (std::size_t k = 1; k <= n; ++k) core.emplace_back(double(k) * h, geodesic_step(st, core.back().second, h));
  return core;
}

TubeReport tube_test(const TubeChart& tube, const DiffusionConfig& cfg, std::size_t n_paths, int injectivity_samples,
                     const EnsembleOptions& opts) {
  require_paths(n_paths);
  cfg.validate();
  if (injectivity_samples > 0) tube.check_injective(injectivity_samples, cfg.seed);
  const double T = tube.length(), u = tube.radius();
  enum class Exit { Inside, FarCap, Lateral, NearCap, Exploded };
  std::vector<Exit> out(n_paths, Exit::Inside);

  parallel_paths(n_paths, opts.threads, [&](std::size_t i) {
    double s = 0.0;
    Vec3 x = Vec3::Zero();
    Exit& e = out[i];
    SimulateOptions so{false, [&](double t, const FrameState& st) {
                         if (t == 0.0) return true;
                         double s1 = s;
                         Vec3 x1 = x;
                         bool ok = tube.invert(st.point, s1, x1);
                         if (!ok) {
                           s1 = t;
                           x1.setZero();
                           ok = tube.invert(st.point, s1, x1);
                         }
                         // a point the chart cannot resolve lies well outside the tube
                         if (!ok || x1.norm() >= u) {
                           e = Exit::Lateral;
                         } else if (s1 >= T) {
                           e = Exit::FarCap;
                         } else if (s1 < 0.0) {
                           e = Exit::NearCap;
                         }
                         s = s1;
                         x = x1;
                         return e == Exit::Inside;
                       }};
    const Trajectory tr = run_path(tube.spacetime(), cfg, tube.start(), i, so);
    if (e == Exit::Inside && tr.termination == Termination::Exploded) e = Exit::Exploded;
  });
  report_progress(opts, n_paths);

  TubeReport rep;
  rep.n_paths = n_paths;
  rep.length = T;
  rep.radius = u;
  rep.injectivity_samples = injectivity_samples;
  rep.config = cfg;
  for (Exit e : out) {
    switch (e) {
      case Exit::Inside: ++rep.inside; break;
      case Exit::FarCap: ++rep.far_cap; break;
      case Exit::Lateral: ++rep.lateral; break;
      case Exit::NearCap: ++rep.near_cap; break;
      case Exit::Exploded: ++rep.exploded; break;
    }
  }
  rep.p_far_cap = double(rep.far_cap) / double(n_paths);
  const WilsonInterval ci = wilson_interval(rep.far_cap, n_paths);
  rep.ci_low = ci.low;
  rep.ci_high = ci.high;
  return rep;
}

}  // namespace reldiff
