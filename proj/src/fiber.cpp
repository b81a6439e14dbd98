#include "reldiff/fiber.hpp"

#include "reldiff/rng.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reldiff {

// ------------------------------------------------------------ curvature functionals

double ric_tilde(const Spacetime& st, const Frame& f) { return contract(curvature(st, f.point).ricci, f.e.col(0)); }

double t_tilde(const Spacetime& st, const Frame& f) {
  return contract(curvature(st, f.point).energy_momentum, f.e.col(0));
}

Mat4 frame_ricci(const Spacetime& st, const Frame& f) {
  return f.e.transpose() * curvature(st, f.point).ricci * f.e;
}

// ------------------------------------------------------------ generator probes

namespace {

template <class D>
double richardson(const D& diff, double h, bool on) {
  const double d1 = diff(h);
  if (!on) return d1;
  return (4.0 * diff(0.5 * h) - d1) / 3.0;
}

}  // namespace

double apply_h0(const Spacetime& st, const FiberFunctional& F, const Frame& f, const GeneratorProbe& probe) {
  auto diff = [&](double h) { return (F(geodesic_flow(st, f, h)) - F(geodesic_flow(st, f, -h))) / (2.0 * h); };
  return richardson(diff, probe.h_first, probe.richardson);
}

double vertical_laplacian(const FiberFunctional& F, const Frame& f, const GeneratorProbe& probe) {
  const double f0 = F(f);
  auto diff = [&](double h) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      const Vec3 b = h * Vec3::Unit(j);
      s += F(vertical_flow(f, b)) - 2.0 * f0 + F(vertical_flow(f, -b));
    }
    return s / (h * h);
  };
  return richardson(diff, probe.h_second, probe.richardson);
}

double apply_generator(const Spacetime& st, const FiberFunctional& F, const Frame& f, double sigma,
                       const GeneratorProbe& probe) {
  return apply_h0(st, F, f, probe) + 0.5 * sigma * sigma * vertical_laplacian(F, f, probe);
}

double h0_ric_tilde_direct(const Spacetime& st, const Frame& f, double h) {
  const Vec4 u = f.e.col(0);
  const Mat4 ric = curvature(st, f.point).ricci;
  const Rank3 G = st.christoffel(f.point);
  double out = 0.0;
  for (int c = 0; c < 4; ++c) {
    if (u(c) == 0.0) continue;
    const double hc = h * (1.0 + std::abs(f.point.coords(c)));
    auto ricci_at = [&](double k) {
      SpacetimePoint q = f.point;
      q.coords(c) += k * hc;
      return Mat4(curvature(st, q).ricci);
    };
    const Mat4 d = (-ricci_at(2) + 8.0 * ricci_at(1) - 8.0 * ricci_at(-1) + ricci_at(-2)) / (12.0 * hc);
    out += u(c) * contract(d, u);
  }
  // connection terms: -2 u^a u^b u^c Gamma^d_ca Ric_db
  Vec4 gu = Vec4::Zero();  // Gamma^d_ca u^c u^a
  for (int d = 0; d < 4; ++d)
    for (int c = 0; c < 4; ++c)
      for (int a = 0; a < 4; ++a) gu(d) += G(d, c, a) * u(c) * u(a);
  out -= 2.0 * gu.dot(ric * u);
  return out;
}

IdentityResidual lemma9_residual(const Spacetime& st, const Frame& f, double sigma, const GeneratorProbe& probe) {
  const FiberFunctional ric{"RIC_TILDE", [&st](const Frame& g) { return ric_tilde(st, g); }};
  IdentityResidual r;
  const double rt = ric_tilde(st, f);
  r.lhs = apply_generator(st, ric, f, sigma, probe);
  r.rhs = h0_ric_tilde_direct(st, f) + 2.0 * sigma * sigma * (rt + t_tilde(st, f));
  r.residual = std::abs(r.lhs - r.rhs);
  r.scale = std::abs(rt);
  return r;
}

IdentityResidual vertical_residual(const Spacetime& st, const Frame& f, const GeneratorProbe& probe) {
  const FiberFunctional ric{"RIC_TILDE", [&st](const Frame& g) { return ric_tilde(st, g); }};
  IdentityResidual r;
  const double rt = ric_tilde(st, f);
  r.lhs = vertical_laplacian(ric, f, probe);
  r.rhs = 4.0 * rt + 4.0 * t_tilde(st, f);
  r.residual = std::abs(r.lhs - r.rhs);
  r.scale = std::abs(rt);
  return r;
}

// ------------------------------------------------------------ hyperbolic Green function

double green_h3(double rho) {
  if (!(rho > 0.0)) throw std::domain_error(fmt::format("green_h3: rho = {} must be > 0", rho));
  // (coth rho - 1) / (2 pi) without cancellation
  return 1.0 / (M_PI * std::expm1(2.0 * rho));
}

double radial_half_laplacian(const std::function<double(double)>& u, double rho, double h) {
  const double um2 = u(rho - 2 * h), um1 = u(rho - h), u0 = u(rho), up1 = u(rho + h), up2 = u(rho + 2 * h);
  const double d1 = (um2 - 8.0 * um1 + 8.0 * up1 - up2) / (12.0 * h);
  const double d2 = (-um2 + 16.0 * um1 - 30.0 * u0 + 16.0 * up1 - up2) / (12.0 * h * h);
  return 0.5 * (d2 + 2.0 / std::tanh(rho) * d1);
}

QuadratureSpec QuadratureSpec::refined() const {
  QuadratureSpec q = *this;
  q.rho_panels *= 2;
  q.n_cos *= 2;
  q.n_phi *= 2;
  return q;
}

namespace {

struct Rule {
  std::vector<double> x, w;
};

// Gauss-Legendre on [-1, 1] from the Jacobi matrix eigenproblem.
Rule gauss_legendre(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule r;
  for (int i = 0; i < n; ++i) {
    r.x.push_back(es.eigenvalues()(i));
    r.w.push_back(2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i));
  }
  return r;
}

std::vector<Vec3> probe_directions() {
  std::vector<Vec3> d;
  for (int j = 0; j < 3; ++j) {
    d.push_back(Vec3::Unit(j));
    d.push_back(-Vec3::Unit(j));
  }
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) d.push_back(Vec3(sx, sy, sz).normalized());
  return d;
}

GrowthFit fit_growth(const std::function<double(double, const Vec3&)>& F, double lo, double hi) {
  const int n = 21;
  const auto dirs = probe_directions();
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n);
  GrowthFit fit;
  double fmax_all = 0.0;
  std::vector<double> fmax(n);
  for (int i = 0; i < n; ++i) {
    const double rho = lo + (hi - lo) * i / (n - 1);
    double m = 0.0;
    for (const Vec3& d : dirs) m = std::max(m, std::abs(F(rho, d)));
    fmax[i] = m;
    fmax_all = std::max(fmax_all, m);
  }
  fit.max_abs = fmax_all;
  if (!(fmax_all > 0.0)) return fit;
  fit.null = false;
  for (int i = 0; i < n; ++i) {
    const double rho = lo + (hi - lo) * i / (n - 1);
    A(i, 0) = 1.0;
    A(i, 1) = rho;
    A(i, 2) = rho * rho;
    y(i) = std::log(std::max(fmax[i], 1e-300 * fmax_all));
  }
  const Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
  fit.rate = c(1) + 2.0 * c(2) * 0.5 * (lo + hi);  // slope at mid-range
  fit.quadratic = c(2);
  return fit;
}

Vec4 fiber_point(double rho, const Vec3& n) {
  Vec4 y;
  y << std::cosh(rho), std::sinh(rho) * n;
  return y;
}

}  // namespace

GrowthFit fit_fiber_growth(const FiberFunctional& F, const Frame& f, double rho_lo, double rho_hi) {
  return fit_growth([&](double rho, const Vec3& n) { return F(vertical_flow(f, rho * n)); }, rho_lo, rho_hi);
}

UResult compute_U_detail(const Spacetime& st, const Frame& f, const QuadratureSpec& q) {
  if (!(q.rho_cut > 0.0) || q.rho_panels < 1 || q.rho_order < 1 || q.n_cos < 1 || q.n_phi < 1)
    throw std::invalid_argument("compute_U: invalid quadrature specification");
  const MetricData m = curvature(st, f.point);
  double riemann_scale = 1.0;
  for (int i = 0; i < 256; ++i) riemann_scale = std::max(riemann_scale, std::abs(m.riemann.data()[i]));
  UResult out;
  // the truncated integral amplifies roundoff by e^{2 rho_cut}; Ricci at roundoff level is zero
  if (m.ricci.cwiseAbs().maxCoeff() <= 1e-12 * riemann_scale) return out;
  const Mat4 R = f.e.transpose() * m.ricci * f.e;
  auto ric_yy = [&R](double rho, const Vec3& n) {
    const Vec4 y = fiber_point(rho, n);
    return y.dot(R * y);
  };
  // On the fiber RIC(y, y) ~ Q(n) e^{2 rho} / 4 with Q(n) = RIC((1, n), (1, n)). Q vanishes
  // on the sphere only for RIC = kappa g, where RIC(y, y) = kappa. Growth never exceeds e^{2 rho}.
  double qmax = 0.0;
  for (const Vec3& n : probe_directions()) {
    Vec4 z;
    z << 1.0, n;
    qmax = std::max(qmax, std::abs(z.dot(R * z)));
  }
  out.growth_rate = qmax > 1e-9 * R.cwiseAbs().maxCoeff() ? 2.0 : 0.0;

  const Rule gr = gauss_legendre(q.rho_order);
  const Rule gc = gauss_legendre(q.n_cos);
  const double width = q.rho_cut / q.rho_panels;
  // angular average of RIC(y, y) at each rho, then the radial sum, in fixed order
  double total = 0.0;
  for (int p = 0; p < q.rho_panels; ++p) {
    for (int i = 0; i < q.rho_order; ++i) {
      const double rho = width * (p + 0.5 * (gr.x[i] + 1.0));
      const double wr = 0.5 * width * gr.w[i];
      double ang = 0.0;
      for (int a = 0; a < q.n_cos; ++a) {
        const double ct = gc.x[a], stt = std::sqrt(1.0 - ct * ct);
        double ring = 0.0;
        for (int b = 0; b < q.n_phi; ++b) {
          const double phi = 2.0 * M_PI * b / q.n_phi;
          ring += ric_yy(rho, Vec3(stt * std::cos(phi), stt * std::sin(phi), ct));
        }
        ang += gc.w[a] * ring * (2.0 * M_PI / q.n_phi);
      }
      const double sh = std::sinh(rho);
      total += wr * green_h3(rho) * sh * sh * ang;
    }
  }
  out.value = 2.0 * total;
  // G sinh^2 -> 1/(4 pi), so the integrand tends to 2 RIC(y, y): the tail diverges
  // (linearly for RIC = kappa g, exponentially otherwise) for every non-zero Ricci tensor.
  out.tail_converges = false;
  out.tail_bound = std::numeric_limits<double>::infinity();
  return out;
}

double compute_U(const Spacetime& st, const Frame& f, const QuadratureSpec& q) { return compute_U_detail(st, f, q).value; }

double poisson_residual(const Spacetime& st, const Frame& f, const QuadratureSpec& q, const GeneratorProbe& probe) {
  const FiberFunctional U{"U", [&](const Frame& g) { return compute_U(st, g, q); }};
  return std::abs(0.5 * vertical_laplacian(U, f, probe) + 2.0 * ric_tilde(st, f));
}

// ------------------------------------------------------------ functional catalog

std::vector<std::string> functional_names() {
  return {"RIC_TILDE", "T_TILDE", "U", "RIC_TILDE_PLUS_U", "MDOT0", "MDOT0_CAPPED", "ONE", "ZERO"};
}

FiberFunctional make_functional(const std::string& name, SpacetimePtr st, const QuadratureSpec& q) {
  if (name == "ONE") return {name, [](const Frame&) { return 1.0; }};
  if (name == "ZERO") return {name, [](const Frame&) { return 0.0; }};
  if (name == "MDOT0") return {name, [](const Frame& f) { return f.e(0, 0); }};
  if (name == "MDOT0_CAPPED") return {name, [](const Frame& f) { return 10.0 * std::tanh(f.e(0, 0) / 10.0); }};
  if (!st) throw std::invalid_argument(fmt::format("functional {} needs a spacetime", name));
  if (name == "RIC_TILDE") return {name, [st](const Frame& f) { return ric_tilde(*st, f); }};
  if (name == "T_TILDE") return {name, [st](const Frame& f) { return t_tilde(*st, f); }};
  if (name == "U") return {name, [st, q](const Frame& f) { return compute_U(*st, f, q); }};
  if (name == "RIC_TILDE_PLUS_U")
    return {name, [st, q](const Frame& f) { return ric_tilde(*st, f) + compute_U(*st, f, q); }};
  throw std::invalid_argument(fmt::format("unknown functional '{}'", name));
}

// ------------------------------------------------------------ checkers

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Satisfied: return "satisfied";
    case Verdict::Violated: return "violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

const ClauseResult* CriterionReport::clause(const std::string& name) const {
  for (const auto& c : clauses)
    if (c.name == name) return &c;
  return nullptr;
}

SamplingEnvelope default_envelope(const Spacetime& st, int n_frames, double rapidity_max, std::uint64_t seed) {
  SamplingEnvelope env;
  env.n_frames = n_frames;
  env.rapidity_max = rapidity_max;
  env.seed = seed;
  const std::string& id = st.id();
  if (id == "minkowski") {
    env.lo = Vec4::Constant(-5.0);
    env.hi = Vec4::Constant(5.0);
  } else if (id == "schwarzschild") {
    const double M = st.parameters().at("M");
    env.lo = Vec4(-5.0 * M, 3.0 * M, 0.3, 0.0);
    env.hi = Vec4(5.0 * M, 20.0 * M, M_PI - 0.3, 2.0 * M_PI);
  } else if (id == "flrw_power" || id == "einstein_de_sitter") {
    env.lo = Vec4(0.5, -5.0, -5.0, -5.0);
    env.hi = Vec4(3.0, 5.0, 5.0, 5.0);
  } else if (id == "de_sitter") {
    env.lo = Vec4(-1.0, -5.0, -5.0, -5.0);
    env.hi = Vec4(1.0, 5.0, 5.0, 5.0);
  }
  return env;
}

std::vector<Frame> sample_frames(const Spacetime& st, const SamplingEnvelope& env) {
  CounterStream rng(env.seed, 0x46524D00u);
  std::vector<Frame> out;
  out.reserve(env.n_frames);
  for (int i = 0; i < env.n_frames; ++i) {
    SpacetimePoint p;
    for (int k = 0; k < 4; ++k) p.coords(k) = env.lo(k) + rng.uniform() * (env.hi(k) - env.lo(k));
    const double rho = env.rapidity_max * rng.uniform();
    const Vec3 n = rng.unit_vector();
    const Mat3 R = random_rotation(rng);
    Frame f = tetrad_frame(st, p);
    f.e = f.e * boost_matrix(rho * n) * embed_rotation(R);
    out.push_back(f);
  }
  return out;
}

namespace {

struct Evaluated {
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t argmin = 0;
};

template <class Fn>
Evaluated minimize(std::size_t n, const Fn& margin) {
  Evaluated e;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = margin(i);
    if (m < e.min_margin || std::isnan(m)) {
      e.min_margin = m;
      e.argmin = i;
      if (std::isnan(m)) break;
    }
  }
  return e;
}

void finalize(CriterionReport& r, bool precondition_ok) {
  r.failing_clause.clear();
  bool any_inconclusive = false;
  for (const auto& c : r.clauses) {
    if (c.verdict == Verdict::Violated && r.failing_clause.empty()) r.failing_clause = c.name;
    if (c.verdict == Verdict::Inconclusive) any_inconclusive = true;
  }
  if (!precondition_ok)
    r.verdict = Verdict::Inconclusive;
  else if (!r.failing_clause.empty())
    r.verdict = Verdict::Violated;
  else
    r.verdict = any_inconclusive ? Verdict::Inconclusive : Verdict::Satisfied;
}

// Tolerance for sampled inequalities carrying finite-difference error.
double tolerance(double scale) { return 1e-7 * (1.0 + scale); }

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

ClauseResult inequality(const std::string& name, const std::string& what, const Evaluated& e, double tol,
                        const std::vector<Frame>& samples, std::map<std::string, double> values,
                        CriterionReport& r) {
  ClauseResult c{name, Verdict::Satisfied, e.min_margin, what};
  if (samples.empty()) {
    c.verdict = Verdict::Inconclusive;
    c.margin = 0.0;
    return c;
  }
  if (!(e.min_margin >= -tol)) {
    c.verdict = Verdict::Violated;
    values["margin"] = e.min_margin;
    r.witnesses.push_back({name, samples[e.argmin], std::move(values)});
  }
  return c;
}

}  // namespace

CriterionReport check_lemma7(const Spacetime& st, const FiberFunctional& F, const Frame& f0, double sigma, double C,
                             const std::vector<Frame>& samples, const GeneratorProbe& probe) {
  CriterionReport r;
  r.criterion = "lemma7";
  r.envelope.n_frames = static_cast<int>(samples.size());
  r.constants["C"] = C;
  r.constants["sigma"] = sigma;
  bool pre = true;

  const double F0 = F(f0);
  r.constants["F_f0"] = F0;
  if (!(C > 0.0)) {
    pre = false;
    r.clauses.push_back({"C > 0", Verdict::Inconclusive, C, "the constant C must be positive"});
  }
  {
    ClauseResult c{"F(f0) > 0", F0 > 0.0 ? Verdict::Satisfied : Verdict::Inconclusive, F0,
                   "precondition on the starting frame"};
    if (!(F0 > 0.0)) pre = false;
    r.clauses.push_back(c);
  }

  std::vector<double> Fv(samples.size()), GF(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Fv[i] = F(samples[i]);
    GF[i] = apply_generator(st, F, samples[i], sigma, probe);
  }
  const double scale = std::max(max_abs(Fv), max_abs(GF));
  {
    const double sup = Fv.empty() ? 0.0 : *std::max_element(Fv.begin(), Fv.end());
    r.constants["sup_F"] = sup;
    const bool finite = std::all_of(Fv.begin(), Fv.end(), [](double x) { return std::isfinite(x); });
    r.clauses.push_back({"F bounded above", finite ? Verdict::Satisfied : Verdict::Violated, sup,
                         fmt::format("sampled sup F = {:.6g}", sup)});
  }
  const Evaluated e = minimize(samples.size(), [&](std::size_t i) { return GF[i] - C * Fv[i]; });
  double cmax = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (Fv[i] > 0.0) cmax = std::min(cmax, GF[i] / Fv[i]);
  r.constants["C_max_admissible"] = cmax;
  const std::size_t k = e.argmin;
  r.clauses.push_back(inequality("G F >= C F", "generator lower bound on the samples", e, tolerance(scale), samples,
                                 samples.empty() ? std::map<std::string, double>{}
                                                 : std::map<std::string, double>{{"F", Fv[k]}, {"GF", GF[k]}},
                                 r));
  if (!pre) r.note = "precondition failed: the criterion needs C > 0 and F(f0) > 0";
  finalize(r, pre);
  return r;
}

CriterionReport check_lemma11(const Spacetime& st, const FiberFunctional& F, const FiberFunctional& H, double c,
                              double c_prime, double sigma, const std::vector<Frame>& samples,
                              const GeneratorProbe& probe) {
  CriterionReport r;
  r.criterion = "lemma11";
  r.envelope.n_frames = static_cast<int>(samples.size());
  r.constants["c"] = c;
  r.constants["c_prime"] = c_prime;
  r.constants["sigma"] = sigma;
  bool pre = true;
  if (!(0.0 <= c_prime && c_prime < c)) {
    pre = false;
    r.clauses.push_back({"0 <= c' < c", Verdict::Inconclusive, c - c_prime, "constants out of range"});
  }
  const std::size_t n = samples.size();
  std::vector<double> Fv(n), Hv(n), GF(n), GH(n);
  for (std::size_t i = 0; i < n; ++i) {
    Fv[i] = F(samples[i]);
    Hv[i] = H(samples[i]);
    GF[i] = apply_generator(st, F, samples[i], sigma, probe);
    GH[i] = apply_generator(st, H, samples[i], sigma, probe);
  }
  const double scale = std::max({max_abs(Fv), max_abs(Hv), max_abs(GF), max_abs(GH)});
  const double tol = tolerance(scale);

  const double fmax = max_abs(Fv), hmax = max_abs(Hv);
  if (fmax <= tol && hmax <= tol) {
    pre = false;
    r.clauses.push_back({"non-null", Verdict::Inconclusive, 0.0, "F and H vanish on every sample"});
  } else {
    const Evaluated neg = minimize(n, [&](std::size_t i) { return std::min(Fv[i], Hv[i]); });
    r.clauses.push_back(inequality("F, H >= 0", "non-negativity", neg, tol, samples,
                                   {{"F", Fv[neg.argmin]}, {"H", Hv[neg.argmin]}}, r));
  }
  auto pick = [&](const std::vector<double>& a, const std::vector<double>& b, std::size_t i, const char* ka,
                  const char* kb) { return std::map<std::string, double>{{ka, a[i]}, {kb, b[i]}}; };
  const Evaluated le = minimize(n, [&](std::size_t i) { return Hv[i] - Fv[i]; });
  r.clauses.push_back(inequality("F <= H", "domination", le, tol, samples,
                                 n ? pick(Fv, Hv, le.argmin, "F", "H") : std::map<std::string, double>{}, r));
  const Evaluated gf = minimize(n, [&](std::size_t i) { return GF[i] - c * Fv[i]; });
  r.clauses.push_back(inequality("G F >= c F", "growth of F", gf, tol, samples,
                                 n ? pick(Fv, GF, gf.argmin, "F", "GF") : std::map<std::string, double>{}, r));
  const Evaluated gh = minimize(n, [&](std::size_t i) { return c_prime * Hv[i] - GH[i]; });
  r.clauses.push_back(inequality("G H <= c' H", "growth of H", gh, tol, samples,
                                 n ? pick(Hv, GH, gh.argmin, "H", "GH") : std::map<std::string, double>{}, r));

  double diff = 0.0;
  for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(Fv[i] - Hv[i]));
  if (n && diff <= tol && fmax > tol)
    r.note = "F = H on every sample: G F >= c F and G F <= c' F with c' < c cannot both hold where F > 0";
  if (!pre && r.note.empty()) r.note = "precondition failed";
  finalize(r, pre);
  return r;
}

namespace {

struct CurvatureSample {
  double ric = 0.0, tt = 0.0, scalar = 0.0, h0ric = 0.0;
};

std::vector<CurvatureSample> curvature_samples(const Spacetime& st, const std::vector<Frame>& samples) {
  const FiberFunctional ric{"RIC_TILDE", [&st](const Frame& g) { return ric_tilde(st, g); }};
  std::vector<CurvatureSample> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const MetricData m = curvature(st, samples[i].point);
    const Vec4 u = samples[i].e.col(0);
    out[i].ric = contract(m.ricci, u);
    out[i].tt = contract(m.energy_momentum, u);
    out[i].scalar = m.scalar;
    out[i].h0ric = apply_h0(st, ric, samples[i]);
  }
  return out;
}

}  // namespace

CriterionReport check_theorem8(const Spacetime& st, double sigma, double C, const std::vector<Frame>& samples) {
  CriterionReport r;
  r.criterion = "thm8";
  r.envelope.n_frames = static_cast<int>(samples.size());
  const double c = C - 2.0 * sigma * sigma;
  r.constants["C"] = C;
  r.constants["sigma"] = sigma;
  r.constants["c"] = c;
  if (samples.empty()) {
    r.note = "no sample frames";
    finalize(r, false);
    return r;
  }
  const auto cs = curvature_samples(st, samples);
  const std::size_t n = cs.size();
  double scale = 0.0;
  for (const auto& s : cs) scale = std::max({scale, std::abs(s.ric), std::abs(s.tt), std::abs(s.h0ric)});
  const double tol = tolerance(scale);

  const Evaluated e1 = minimize(n, [&](std::size_t i) { return cs[i].tt; });
  r.clauses.push_back(inequality("1", "T(e0, e0) >= 0", e1, tol, samples,
                                 {{"T_tilde", cs[e1.argmin].tt}, {"RIC_tilde", cs[e1.argmin].ric}}, r));

  {
    double mx = -std::numeric_limits<double>::infinity(), mean = 0.0, var = 0.0;
    std::size_t imax = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cs[i].ric > mx) {
        mx = cs[i].ric;
        imax = i;
      }
      mean += cs[i].ric / n;
    }
    for (const auto& s : cs) var += (s.ric - mean) * (s.ric - mean) / n;
    r.constants["RIC_tilde_sup"] = mx;
    r.constants["RIC_tilde_variance"] = var;
    ClauseResult cl{"2", Verdict::Satisfied, mx, ""};
    std::vector<std::string> fails;
    if (!(mx > tol)) fails.push_back("RIC~ is never positive on the samples");
    if (!std::isfinite(mx)) fails.push_back("RIC~ is not bounded above on the samples");
    if (!(std::sqrt(var) > tol)) fails.push_back("RIC~ is constant on the samples");
    if (fails.empty()) {
      cl.detail = "RIC~ positive somewhere, bounded above, non-constant";
    } else {
      cl.verdict = Verdict::Violated;
      cl.detail = fails.front();
      for (std::size_t k = 1; k < fails.size(); ++k) cl.detail += "; " + fails[k];
      r.witnesses.push_back({"2", samples[imax], {{"RIC_tilde", cs[imax].ric}, {"variance", var}}});
    }
    r.clauses.push_back(cl);
  }

  const Evaluated e3 = minimize(n, [&](std::size_t i) { return cs[i].h0ric - c * cs[i].ric; });
  r.clauses.push_back(inequality("3", "H0 RIC~ >= (C - 2 sigma^2) RIC~", e3, tol, samples,
                                 {{"H0_RIC_tilde", cs[e3.argmin].h0ric}, {"RIC_tilde", cs[e3.argmin].ric}}, r));

  // both readings of c = C - 2 sigma^2: the admissible range of c on the samples
  double c_hi = std::numeric_limits<double>::infinity(), c_lo = -std::numeric_limits<double>::infinity();
  for (const auto& s : cs) {
    if (s.ric > tol) c_hi = std::min(c_hi, s.h0ric / s.ric);
    if (s.ric < -tol) c_lo = std::max(c_lo, s.h0ric / s.ric);
  }
  r.constants["c_max_admissible"] = c_hi;
  r.constants["c_min_admissible"] = c_lo;
  r.constants["C_max_admissible"] = c_hi + 2.0 * sigma * sigma;
  r.constants["C_min_admissible"] = c_lo + 2.0 * sigma * sigma;
  r.note = "given C, c = C - 2 sigma^2 is tested; given c, any C in [C_min_admissible, C_max_admissible] "
           "with C - 2 sigma^2 = c satisfies (3) on the samples";
  finalize(r, true);
  return r;
}

SigmaWindow theorem12_window(double alpha, double c, double c_prime) {
  SigmaWindow w;
  w.lo = std::sqrt(std::max(c, 0.0) / 2.0);
  w.hi = alpha > 0.0 ? std::sqrt(std::max(c_prime, 0.0) / (2.0 * alpha)) : 0.0;
  w.feasible = w.lo < w.hi;
  return w;
}

CriterionReport check_theorem12(const Spacetime& st, double sigma, double alpha, double c, double c_prime,
                                const std::vector<Frame>& samples, const QuadratureSpec& q) {
  CriterionReport r;
  r.criterion = "thm12";
  r.envelope.n_frames = static_cast<int>(samples.size());
  r.constants["sigma"] = sigma;
  r.constants["alpha"] = alpha;
  r.constants["c"] = c;
  r.constants["c_prime"] = c_prime;
  r.constants["rho_cut"] = q.rho_cut;
  bool pre = true;
  if (!(alpha > 0.0 && alpha < 1.0) || !(0.0 <= c_prime && c_prime < c)) {
    pre = false;
    r.clauses.push_back({"parameters", Verdict::Inconclusive, 0.0, "requires 0 < alpha < 1 and 0 <= c' < c"});
  }
  const SigmaWindow w = theorem12_window(alpha, c, c_prime);
  r.constants["window_lo"] = w.lo;
  r.constants["window_hi"] = w.hi;
  r.constants["window_feasible"] = w.feasible ? 1.0 : 0.0;
  {
    ClauseResult cl{"window", w.contains(sigma) ? Verdict::Satisfied : Verdict::Violated,
                    std::min(sigma - w.lo, w.hi - sigma), ""};
    cl.detail = w.feasible ? fmt::format("sqrt(c/2) = {:.6g} < sigma < sqrt(c'/(2 alpha)) = {:.6g}", w.lo, w.hi)
                           : fmt::format("empty window: sqrt(c/2) = {:.6g} >= sqrt(c'/(2 alpha)) = {:.6g}", w.lo, w.hi);
    r.clauses.push_back(cl);
  }
  if (samples.empty()) {
    r.note = "no sample frames";
    finalize(r, false);
    return r;
  }

  const auto cs = curvature_samples(st, samples);
  const std::size_t n = cs.size();
  double scale = 0.0;
  for (const auto& s : cs) scale = std::max({scale, std::abs(s.ric), std::abs(s.h0ric), std::abs(s.scalar)});
  const double tol = tolerance(scale);

  // (1') static energy conditions
  {
    const Evaluated ric = minimize(n, [&](std::size_t i) { return cs[i].ric; });
    const Evaluated rs = minimize(n, [&](std::size_t i) { return -cs[i].scalar; });
    double mx = 0.0;
    for (const auto& s : cs) mx = std::max(mx, std::abs(s.ric));
    ClauseResult cl{"1'", Verdict::Satisfied, std::min(ric.min_margin, rs.min_margin), ""};
    std::vector<std::string> fails;
    if (!(mx > tol)) {
      fails.push_back("RIC~ vanishes identically on the samples");
      r.witnesses.push_back({"1'", samples[0], {{"RIC_tilde", cs[0].ric}}});
    }
    if (ric.min_margin < -tol) {
      fails.push_back("RIC~ < 0 somewhere");
      r.witnesses.push_back({"1'", samples[ric.argmin], {{"RIC_tilde", cs[ric.argmin].ric}}});
    }
    if (rs.min_margin < -tol) {
      fails.push_back("R > 0 somewhere");
      r.witnesses.push_back({"1'", samples[rs.argmin], {{"R", cs[rs.argmin].scalar}}});
    }
    if (!fails.empty()) {
      cl.verdict = Verdict::Violated;
      cl.detail = fails.front();
      for (std::size_t k = 1; k < fails.size(); ++k) cl.detail += "; " + fails[k];
    } else {
      cl.detail = "RIC~ >= 0, not identically 0, R <= 0";
    }
    r.clauses.push_back(cl);
  }

  // (2') regularity: exp-boundedness and ((1 - alpha)/alpha) RIC~ <= U
  std::vector<double> U(n, 0.0), h0U(n, 0.0);
  bool u_ok = true, tail_ok = true;
  std::string u_error;
  double worst_rate = 0.0;
  try {
    for (std::size_t i = 0; i < n; ++i) {
      const UResult u = compute_U_detail(st, samples[i], q);
      U[i] = u.value;
      tail_ok = tail_ok && u.tail_converges;
      worst_rate = std::max(worst_rate, u.growth_rate);
    }
    const FiberFunctional Uf{"U", [&](const Frame& f) { return compute_U(st, f, q); }};
    for (std::size_t i = 0; i < n; ++i) h0U[i] = apply_h0(st, Uf, samples[i]);
  } catch (const std::exception& err) {
    u_ok = false;
    u_error = err.what();
  }
  // RIC~ is a quadratic form on the fiber, so it is exp-bounded with rate at most 2
  r.constants["fiber_growth_rate_max"] = worst_rate;
  {
    const double k = (1.0 - alpha) / alpha;
    ClauseResult cl{"2'", Verdict::Satisfied, 0.0, ""};
    if (!u_ok) {
      cl.verdict = Verdict::Inconclusive;
      cl.detail = "U could not be evaluated: " + u_error;
    } else {
      const Evaluated e = minimize(n, [&](std::size_t i) { return U[i] - k * cs[i].ric; });
      cl.margin = e.min_margin;
      if (e.min_margin < -tolerance(std::max(scale, max_abs(U)))) {
        cl.verdict = Verdict::Violated;
        cl.detail = "((1 - alpha)/alpha) RIC~ > U somewhere";
        r.witnesses.push_back({"2'", samples[e.argmin], {{"U", U[e.argmin]}, {"RIC_tilde", cs[e.argmin].ric}}});
      } else if (!tail_ok) {
        cl.verdict = Verdict::Inconclusive;
        cl.detail = fmt::format("U is the integral truncated at rho_cut = {}: RIC(y, y) does not decay on the fiber, "
                                "so the Green integral diverges",
                                q.rho_cut);
      } else {
        cl.detail = "RIC~ exp-bounded and ((1 - alpha)/alpha) RIC~ <= U";
      }
    }
    r.clauses.push_back(cl);
  }

  // (3') dynamical energy conditions
  const Evaluated e3 = minimize(n, [&](std::size_t i) { return cs[i].h0ric - (c - 2.0 * sigma * sigma) * cs[i].ric; });
  r.clauses.push_back(inequality("3'-i", "H0 RIC~ >= (c - 2 sigma^2) RIC~", e3, tol, samples,
                                 {{"H0_RIC_tilde", cs[e3.argmin].h0ric}, {"RIC_tilde", cs[e3.argmin].ric}}, r));
  {
    const double k = c_prime - 2.0 * alpha * sigma * sigma;
    ClauseResult cl{"3'-ii", Verdict::Satisfied, 0.0, "H0 (RIC~ + U) <= (c' - 2 alpha sigma^2)(RIC~ + U)"};
    if (!u_ok) {
      cl.verdict = Verdict::Inconclusive;
      cl.detail = "U could not be evaluated: " + u_error;
    } else {
      const Evaluated e = minimize(n, [&](std::size_t i) { return k * (cs[i].ric + U[i]) - (cs[i].h0ric + h0U[i]); });
      cl.margin = e.min_margin;
      double sc = scale;
      for (std::size_t i = 0; i < n; ++i) sc = std::max({sc, std::abs(U[i]), std::abs(h0U[i])});
      if (e.min_margin < -tolerance(sc)) {
        cl.verdict = Verdict::Violated;
        r.witnesses.push_back({"3'-ii", samples[e.argmin],
                               {{"U", U[e.argmin]}, {"H0_U", h0U[e.argmin]}, {"RIC_tilde", cs[e.argmin].ric},
                                {"margin", e.min_margin}}});
      } else if (!tail_ok) {
        cl.verdict = Verdict::Inconclusive;
        cl.detail += "; U truncated (divergent Green integral)";
      }
    }
    r.clauses.push_back(cl);
  }
  finalize(r, pre);
  return r;
}

}  // namespace reldiff
