#include "reldiff/serialization.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace reldiff {

json real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double get_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw std::invalid_argument("expected a real, got " + j.dump());
}

namespace {

json reals(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

std::vector<double> get_reals(const json& j) {
  std::vector<double> v;
  for (const json& x : j) v.push_back(get_real(x));
  return v;
}

json real_map(const std::map<std::string, double>& m) {
  json o = json::object();
  for (const auto& [k, v] : m) o[k] = real(v);
  return o;
}

std::map<std::string, double> get_real_map(const json& j) {
  std::map<std::string, double> m;
  for (const auto& [k, v] : j.items()) m[k] = get_real(v);
  return m;
}

json vec4(const Vec4& v) { return reals({v(0), v(1), v(2), v(3)}); }

Vec4 get_vec4(const json& j) {
  const std::vector<double> v = get_reals(j);
  if (v.size() != 4) throw std::invalid_argument("expected 4 reals");
  return Vec4(v[0], v[1], v[2], v[3]);
}

}  // namespace

void to_json(json& j, const Frame& f) {
  std::vector<double> e;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) e.push_back(f.e(a, b));
  j = json{{"chart", f.point.chart}, {"coords", vec4(f.point.coords)}, {"e", reals(e)}};
}

void from_json(const json& j, Frame& f) {
  f.point.chart = j.at("chart").get<int>();
  f.point.coords = get_vec4(j.at("coords"));
  const std::vector<double> e = get_reals(j.at("e"));
  if (e.size() != 16) throw std::invalid_argument("frame: expected 16 matrix entries");
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) f.e(a, b) = e[4 * a + b];
}

json frame_record(const std::string& spacetime, const Frame& f, double defect) {
  json j = f;
  j["spacetime"] = spacetime;
  j["defect"] = real(defect);
  return j;
}

void to_json(json& j, const DiffusionConfig& c) {
  j = json{{"sigma", real(c.sigma)},
           {"ds", real(c.ds)},
           {"s_max", real(c.s_max)},
           {"seed", c.seed},
           {"trajectory_index", c.trajectory_index},
           {"output_stride", c.output_stride},
           {"coord_bound", real(c.explosion.coord_bound)},
           {"curvature_bound", real(c.explosion.curvature_bound)},
           {"min_step", real(c.explosion.min_step)},
           {"chart_exit_scale", real(c.explosion.chart_exit_scale)}};
}

void from_json(const json& j, DiffusionConfig& c) {
  c.sigma = get_real(j.at("sigma"));
  c.ds = get_real(j.at("ds"));
  c.s_max = get_real(j.at("s_max"));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.trajectory_index = j.at("trajectory_index").get<std::uint64_t>();
  c.output_stride = j.at("output_stride").get<int>();
  c.explosion.coord_bound = get_real(j.at("coord_bound"));
  c.explosion.curvature_bound = get_real(j.at("curvature_bound"));
  c.explosion.min_step = get_real(j.at("min_step"));
  c.explosion.chart_exit_scale = get_real(j.at("chart_exit_scale"));
}

void to_json(json& j, const SweepPoint& p) {
  j = json{{"s_max", real(p.s_max)},
           {"n_exploded", p.n_exploded},
           {"p_hat", real(p.p_hat)},
           {"ci_low", real(p.ci_low)},
           {"ci_high", real(p.ci_high)}};
}

void from_json(const json& j, SweepPoint& p) {
  p.s_max = get_real(j.at("s_max"));
  p.n_exploded = j.at("n_exploded").get<std::size_t>();
  p.p_hat = get_real(j.at("p_hat"));
  p.ci_low = get_real(j.at("ci_low"));
  p.ci_high = get_real(j.at("ci_high"));
}

void to_json(json& j, const ExplosionReport& r) {
  j = json{{"spacetime", r.spacetime},
           {"n_paths", r.n_paths},
           {"n_exploded", r.n_exploded},
           {"n_completed", r.n_completed},
           {"zeta_samples", reals(r.zeta_samples)},
           {"reasons", r.reasons},
           {"p_hat", real(r.p_hat)},
           {"ci_low", real(r.ci_low)},
           {"ci_high", real(r.ci_high)},
           {"s_max", real(r.s_max)},
           {"sweep", r.sweep},
           {"config", r.config},
           {"initial_frame", r.initial},
           {"caveat", r.caveat}};
}

void from_json(const json& j, ExplosionReport& r) {
  r.spacetime = j.at("spacetime").get<std::string>();
  r.n_paths = j.at("n_paths").get<std::size_t>();
  r.n_exploded = j.at("n_exploded").get<std::size_t>();
  r.n_completed = j.at("n_completed").get<std::size_t>();
  r.zeta_samples = get_reals(j.at("zeta_samples"));
  r.reasons = j.at("reasons").get<std::map<std::string, std::size_t>>();
  r.p_hat = get_real(j.at("p_hat"));
  r.ci_low = get_real(j.at("ci_low"));
  r.ci_high = get_real(j.at("ci_high"));
  r.s_max = get_real(j.at("s_max"));
  r.sweep = j.at("sweep").get<std::vector<SweepPoint>>();
  r.config = j.at("config").get<DiffusionConfig>();
  r.initial = j.at("initial_frame").get<Frame>();
  r.caveat = j.at("caveat").get<std::string>();
}

void to_json(json& j, const MomentCurve& c) {
  j = json{{"functional", c.functional},
           {"times", reals(c.times)},
           {"means", reals(c.means)},
           {"std_errors", reals(c.std_errors)},
           {"n_alive", c.n_alive},
           {"censored", c.censored},
           {"n_paths", c.n_paths},
           {"initial_value", real(c.initial_value)}};
}

void from_json(const json& j, MomentCurve& c) {
  c.functional = j.at("functional").get<std::string>();
  c.times = get_reals(j.at("times"));
  c.means = get_reals(j.at("means"));
  c.std_errors = get_reals(j.at("std_errors"));
  c.n_alive = j.at("n_alive").get<std::vector<std::size_t>>();
  c.censored = j.at("censored").get<std::vector<std::size_t>>();
  c.n_paths = j.at("n_paths").get<std::size_t>();
  c.initial_value = get_real(j.at("initial_value"));
}

void to_json(json& j, const HittingReport& r) {
  j = json{{"region", r.region},
           {"entry", r.entry},
           {"n_paths", r.n_paths},
           {"n_hit", r.n_hit},
           {"n_exploded", r.n_exploded},
           {"n_completed", r.n_completed},
           {"n_entered", r.n_entered},
           {"p_hit", real(r.p_hit)},
           {"ci_low", real(r.ci_low)},
           {"ci_high", real(r.ci_high)},
           {"hit_times", reals(r.hit_times)},
           {"quantiles", real_map(r.quantiles)},
           {"s_max", real(r.s_max)},
           {"config", r.config}};
}

void from_json(const json& j, HittingReport& r) {
  r.region = j.at("region").get<std::string>();
  r.entry = j.at("entry").get<std::string>();
  r.n_paths = j.at("n_paths").get<std::size_t>();
  r.n_hit = j.at("n_hit").get<std::size_t>();
  r.n_exploded = j.at("n_exploded").get<std::size_t>();
  r.n_completed = j.at("n_completed").get<std::size_t>();
  r.n_entered = j.at("n_entered").get<std::size_t>();
  r.p_hit = get_real(j.at("p_hit"));
  r.ci_low = get_real(j.at("ci_low"));
  r.ci_high = get_real(j.at("ci_high"));
  r.hit_times = get_reals(j.at("hit_times"));
  r.quantiles = get_real_map(j.at("quantiles"));
  r.s_max = get_real(j.at("s_max"));
  r.config = j.at("config").get<DiffusionConfig>();
}

void to_json(json& j, const TubeReport& r) {
  j = json{{"n_paths", r.n_paths},
           {"far_cap", r.far_cap},
           {"lateral", r.lateral},
           {"near_cap", r.near_cap},
           {"exploded", r.exploded},
           {"inside", r.inside},
           {"p_far_cap", real(r.p_far_cap)},
           {"ci_low", real(r.ci_low)},
           {"ci_high", real(r.ci_high)},
           {"length", real(r.length)},
           {"radius", real(r.radius)},
           {"injectivity_samples", r.injectivity_samples},
           {"config", r.config}};
}

void from_json(const json& j, TubeReport& r) {
  r.n_paths = j.at("n_paths").get<std::size_t>();
  r.far_cap = j.at("far_cap").get<std::size_t>();
  r.lateral = j.at("lateral").get<std::size_t>();
  r.near_cap = j.at("near_cap").get<std::size_t>();
  r.exploded = j.at("exploded").get<std::size_t>();
  r.inside = j.at("inside").get<std::size_t>();
  r.p_far_cap = get_real(j.at("p_far_cap"));
  r.ci_low = get_real(j.at("ci_low"));
  r.ci_high = get_real(j.at("ci_high"));
  r.length = get_real(j.at("length"));
  r.radius = get_real(j.at("radius"));
  r.injectivity_samples = j.at("injectivity_samples").get<int>();
  r.config = j.at("config").get<DiffusionConfig>();
}

Verdict verdict_from_string(const std::string& s) {
  for (Verdict v : {Verdict::Satisfied, Verdict::Violated, Verdict::Inconclusive})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

void to_json(json& j, const ClauseResult& c) {
  j = json{{"name", c.name}, {"verdict", to_string(c.verdict)}, {"margin", real(c.margin)}, {"detail", c.detail}};
}

void from_json(const json& j, ClauseResult& c) {
  c.name = j.at("name").get<std::string>();
  c.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  c.margin = get_real(j.at("margin"));
  c.detail = j.at("detail").get<std::string>();
}

void to_json(json& j, const Witness& w) {
  j = json{{"clause", w.clause}, {"frame", w.frame}, {"values", real_map(w.values)}};
}

void from_json(const json& j, Witness& w) {
  w.clause = j.at("clause").get<std::string>();
  w.frame = j.at("frame").get<Frame>();
  w.values = get_real_map(j.at("values"));
}

void to_json(json& j, const SamplingEnvelope& e) {
  j = json{{"n_frames", e.n_frames},
           {"rapidity_max", real(e.rapidity_max)},
           {"seed", e.seed},
           {"lo", vec4(e.lo)},
           {"hi", vec4(e.hi)}};
}

void from_json(const json& j, SamplingEnvelope& e) {
  e.n_frames = j.at("n_frames").get<int>();
  e.rapidity_max = get_real(j.at("rapidity_max"));
  e.seed = j.at("seed").get<std::uint64_t>();
  e.lo = get_vec4(j.at("lo"));
  e.hi = get_vec4(j.at("hi"));
}

void to_json(json& j, const CriterionReport& r) {
  j = json{{"criterion", r.criterion},
           {"verdict", to_string(r.verdict)},
           {"failing_clause", r.failing_clause},
           {"clauses", r.clauses},
           {"witnesses", r.witnesses},
           {"constants", real_map(r.constants)},
           {"envelope", r.envelope},
           {"note", r.note}};
}

void from_json(const json& j, CriterionReport& r) {
  r.criterion = j.at("criterion").get<std::string>();
  r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  r.failing_clause = j.at("failing_clause").get<std::string>();
  r.clauses = j.at("clauses").get<std::vector<ClauseResult>>();
  r.witnesses = j.at("witnesses").get<std::vector<Witness>>();
  r.constants = get_real_map(j.at("constants"));
  r.envelope = j.at("envelope").get<SamplingEnvelope>();
  r.note = j.at("note").get<std::string>();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string format_real(double x) { return fmt::format("{:.17g}", x); }

std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "s,chart,x0,x1,x2,x3";
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out += fmt::format(",e{}{}", a, b);
  out += ",defect\n";
  for (const TrajectorySample& smp : tr.samples) {
    out += format_real(smp.s);
    out += fmt::format(",{}", smp.frame.point.chart);
    for (int i = 0; i < 4; ++i) out += "," + format_real(smp.frame.point.coords(i));
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out += "," + format_real(smp.frame.e(a, b));
    out += "," + format_real(smp.defect) + "\n";
  }
  out += fmt::format("# termination={} zeta={}\n", verdict_string(tr.termination, tr.reason), format_real(tr.zeta));
  return out;
}

TrajectoryTable parse_trajectory_csv(const std::string& text) {
  TrajectoryTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("s,chart,", 0) != 0) throw std::invalid_argument("trajectory csv: bad header");
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto a = line.find("termination="), b = line.find(" zeta=");
      if (a == std::string::npos || b == std::string::npos) throw std::invalid_argument("trajectory csv: bad footer");
      t.verdict = line.substr(a + 12, b - a - 12);
      t.zeta = std::stod(line.substr(b + 6));
      terminated = true;
      continue;
    }
    std::vector<double> f;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) f.push_back(std::stod(cell));
    if (f.size() != 23) throw std::invalid_argument(fmt::format("trajectory csv: expected 23 columns, got {}", f.size()));
    TrajectorySample s;
    s.s = f[0];
    s.frame.point.chart = static_cast<int>(f[1]);
    for (int i = 0; i < 4; ++i) s.frame.point.coords(i) = f[2 + i];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s.frame.e(a, b) = f[6 + 4 * a + b];
    s.defect = f[22];
    t.samples.push_back(s);
  }
  if (!terminated) throw std::invalid_argument("trajectory csv: missing termination line");
  return t;
}

std::string moment_csv(const MomentCurve& c) {
  std::string out = "t,mean,se,n_alive\n";
  for (std::size_t i = 0; i < c.times.size(); ++i)
    out += fmt::format("{},{},{},{}\n", format_real(c.times[i]), format_real(c.means[i]), format_real(c.std_errors[i]),
                       c.n_alive[i]);
  return out;
}

std::string sweep_csv(const ExplosionReport& r) {
  std::string out = "s_max,n_exploded,p_hat,ci_low,ci_high\n";
  for (const SweepPoint& p : r.sweep)
    out += fmt::format("{},{},{},{},{}\n", format_real(p.s_max), p.n_exploded, format_real(p.p_hat),
                       format_real(p.ci_low), format_real(p.ci_high));
  return out;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += fmt::format(".tmp{:08x}", rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace reldiff
