#include "reldiff/config.hpp"
#include "reldiff/fiber.hpp"
#include "reldiff/frame.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace reldiff {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Line numbers of "section.key" entries, for diagnostics; ptree does not keep them.
std::map<std::string, int> index_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line, section;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      lines.emplace(section, n);
    } else if (const auto eq = t.find('='); eq != std::string::npos) {
      lines.emplace(section + "." + trim(t.substr(0, eq)), n);
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(std::string origin, std::map<std::string, int> lines) : origin_(std::move(origin)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = lines_.find(key);
    if (it != lines_.end()) throw ConfigError(fmt::format("{}:{}: {}: {}", origin_, it->second, key, msg));
    throw ConfigError(fmt::format("{}: {}: {}", origin_, key, msg));
  }

  double number(const std::string& key, const std::string& v) const {
    double x = 0.0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (v.empty() || r.ec != std::errc() || r.ptr != end) fail(key, fmt::format("'{}' is not a number", v));
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key, const std::string& v) const {
    std::uint64_t x = 0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (v.empty() || r.ec != std::errc() || r.ptr != end) fail(key, fmt::format("'{}' is not an unsigned integer", v));
    return x;
  }

  int integer(const std::string& key, const std::string& v) const {
    int x = 0;
    const char* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (v.empty() || r.ec != std::errc() || r.ptr != end) fail(key, fmt::format("'{}' is not an integer", v));
    return x;
  }

  std::vector<std::string> words(const std::string& v) const {
    std::string s = v;
    for (char& c : s)
      if (c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }

  std::vector<double> numbers(const std::string& key, const std::string& v, std::size_t n = 0) const {
    std::vector<double> out;
    for (const std::string& w : words(v)) out.push_back(number(key, w));
    if (n && out.size() != n) fail(key, fmt::format("expected {} numbers, got {}", n, out.size()));
    return out;
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, int> lines_;
};

void read_spacetime(const Reader& rd, const pt::ptree& sec, RunConfig& cfg) {
  for (const auto& [k, node] : sec) {
    const std::string v = trim(node.data()), key = "spacetime." + k;
    if (k == "id")
      cfg.spacetime = v;
    else
      cfg.parameters[k] = rd.number(key, v);
  }
  try {
    make_spacetime(cfg.spacetime, cfg.parameters);
  } catch (const std::invalid_argument& e) {
    std::string key = "spacetime.id";
    for (const auto& [k, v] : cfg.parameters)
      if (std::string(e.what()).find("'" + k + "'") != std::string::npos ||
          std::string(e.what()).find(" " + k + " ") != std::string::npos)
        key = "spacetime." + k;
    rd.fail(key, e.what());
  }
}

void read_frame(const Reader& rd, const pt::ptree& sec, RunConfig& cfg) {
  FrameSpec& f = cfg.frame;
  bool has_matrix = false;
  for (const auto& [k, node] : sec) {
    const std::string v = trim(node.data()), key = "frame." + k;
    if (k == "preset") {
      static const std::set<std::string> presets{"tetrad", "comoving", "static-observer", "circular", "explicit"};
      if (!presets.count(v)) rd.fail(key, fmt::format("unknown preset '{}'", v));
      f.preset = v;
    } else if (k == "chart") {
      f.chart = rd.integer(key, v);
    } else if (k == "point") {
      const auto x = rd.numbers(key, v, 4);
      f.point = Vec4(x[0], x[1], x[2], x[3]);
    } else if (k == "radius") {
      f.radius = rd.number(key, v);
      if (!(f.radius > 0.0)) rd.fail(key, "must be > 0");
    } else if (k == "matrix") {
      const auto x = rd.numbers(key, v, 16);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) f.matrix(a, b) = x[4 * a + b];
      has_matrix = true;
    } else if (k == "boost") {
      const auto x = rd.numbers(key, v, 3);
      f.boost = Vec3(x[0], x[1], x[2]);
    } else {
      rd.fail(key, "unknown key");
    }
  }
  if (f.preset == "explicit" && !has_matrix) rd.fail("frame.matrix", "required by preset = explicit");
  if (f.preset == "circular" && !(f.radius > 0.0)) rd.fail("frame.radius", "required by preset = circular");
}

void read_diffusion(const Reader& rd, const pt::ptree& sec, RunConfig& cfg) {
  DiffusionConfig& d = cfg.diffusion;
  for (const auto& [k, node] : sec) {
    const std::string v = trim(node.data()), key = "diffusion." + k;
    if (k == "sigma")
      d.sigma = rd.number(key, v);
    else if (k == "ds")
      d.ds = rd.number(key, v);
    else if (k == "s_max")
      d.s_max = rd.number(key, v);
    else if (k == "seed")
      d.seed = rd.unsigned_integer(key, v);
    else if (k == "output_stride")
      d.output_stride = rd.integer(key, v);
    else if (k == "coord_bound")
      d.explosion.coord_bound = rd.number(key, v);
    else if (k == "curvature_bound")
      d.explosion.curvature_bound = rd.number(key, v);
    else if (k == "min_step")
      d.explosion.min_step = rd.number(key, v);
    else if (k == "chart_exit_scale")
      d.explosion.chart_exit_scale = rd.number(key, v);
    else
      rd.fail(key, "unknown key");
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    // message starts with "diffusion.<field> = "
    const std::string msg = e.what();
    rd.fail(msg.substr(0, msg.find(' ')), msg);
  }
}

void read_experiment(const Reader& rd, const pt::ptree& sec, RunConfig& cfg) {
  ExperimentConfig& x = cfg.experiment;
  auto positive = [&](const std::string& key, double v) {
    if (!(v > 0.0)) rd.fail(key, fmt::format("{} must be > 0", v));
    return v;
  };
  auto nonneg = [&](const std::string& key, double v) {
    if (!(v >= 0.0)) rd.fail(key, fmt::format("{} must be >= 0", v));
    return v;
  };
  for (const auto& [k, node] : sec) {
    const std::string v = trim(node.data()), key = "experiment." + k;
    if (k == "n_paths") {
      x.n_paths = rd.unsigned_integer(key, v);
      if (x.n_paths == 0) rd.fail(key, "must be at least 1");
    } else if (k == "times") {
      x.times = rd.numbers(key, v);
    } else if (k == "sweep") {
      x.sweep = rd.numbers(key, v);
    } else if (k == "functional" || k == "functional_h") {
      const auto names = functional_names();
      if (std::find(names.begin(), names.end(), v) == names.end()) rd.fail(key, fmt::format("unknown functional '{}'", v));
      (k == "functional" ? x.functional : x.functional_h) = v;
    } else if (k == "theorem") {
      x.theorem = v;
    } else if (k == "C") {
      x.C = rd.number(key, v);
    } else if (k == "c") {
      x.c = rd.number(key, v);
    } else if (k == "c_prime") {
      x.c_prime = rd.number(key, v);
    } else if (k == "alpha") {
      x.alpha = rd.number(key, v);
    } else if (k == "n_frames") {
      x.n_frames = rd.integer(key, v);
      if (x.n_frames < 1) rd.fail(key, "must be at least 1");
    } else if (k == "rapidity_max") {
      x.rapidity_max = nonneg(key, rd.number(key, v));
    } else if (k == "frame_seed") {
      x.frame_seed = rd.unsigned_integer(key, v);
    } else if (k == "tube_length") {
      x.tube_length = positive(key, rd.number(key, v));
    } else if (k == "tube_radius") {
      x.tube_radius = positive(key, rd.number(key, v));
    } else if (k == "tube_core_ds") {
      x.tube_core_ds = positive(key, rd.number(key, v));
    } else if (k == "injectivity_samples") {
      x.injectivity_samples = rd.integer(key, v);
      if (x.injectivity_samples < 0) rd.fail(key, "must be >= 0");
    } else if (k == "spacetimes") {
      x.spacetimes = rd.words(v);
      const auto ids = catalog_ids();
      for (const std::string& id : x.spacetimes)
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) rd.fail(key, fmt::format("unknown spacetime '{}'", id));
    } else if (k == "identities") {
      static const std::set<std::string> known{"oracle", "lemma9", "vertical", "green", "poisson"};
      x.identities = rd.words(v);
      for (const std::string& id : x.identities)
        if (!known.count(id)) rd.fail(key, fmt::format("unknown identity '{}'", id));
    } else if (k == "tol_oracle") {
      x.tol_oracle = nonneg(key, rd.number(key, v));
    } else if (k == "tol_lemma9") {
      x.tol_lemma9 = nonneg(key, rd.number(key, v));
    } else if (k == "tol_vertical") {
      x.tol_vertical = nonneg(key, rd.number(key, v));
    } else if (k == "tol_ricci_flat") {
      x.tol_ricci_flat = nonneg(key, rd.number(key, v));
    } else if (k == "tol_green") {
      x.tol_green = nonneg(key, rd.number(key, v));
    } else if (k == "tol_poisson") {
      x.tol_poisson = nonneg(key, rd.number(key, v));
    } else if (k == "poisson_frames") {
      x.poisson_frames = rd.integer(key, v);
      if (x.poisson_frames < 1) rd.fail(key, "must be at least 1");
    } else if (k == "tolerance") {
      x.tolerance = nonneg(key, rd.number(key, v));
    } else {
      rd.fail(key, "unknown key");
    }
  }
}

void read_output(const Reader& rd, const pt::ptree& sec, RunConfig& cfg) {
  for (const auto& [k, node] : sec) {
    const std::string v = trim(node.data()), key = "output." + k;
    if (v.empty()) rd.fail(key, "empty value");
    if (k == "dir")
      cfg.output_dir = v;
    else if (k == "trajectory")
      cfg.trajectory_file = v;
    else if (k == "summary")
      cfg.summary_file = v;
    else
      rd.fail(key, "unknown key");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, e.line(), e.message()));
    }
  }
  const Reader rd(origin, index_lines(text));
  RunConfig cfg;
  cfg.path = origin;
  // sections in dependency order, whatever their order in the file
  for (const auto& [name, sec] : tree) {
    static const std::set<std::string> known{"spacetime", "frame", "diffusion", "experiment", "output"};
    if (!known.count(name)) rd.fail(name, sec.empty() ? "key outside any section" : "unknown section");
  }
  if (auto s = tree.get_child_optional("spacetime")) read_spacetime(rd, *s, cfg);
  if (auto s = tree.get_child_optional("frame")) read_frame(rd, *s, cfg);
  if (auto s = tree.get_child_optional("diffusion")) read_diffusion(rd, *s, cfg);
  if (auto s = tree.get_child_optional("experiment")) read_experiment(rd, *s, cfg);
  if (auto s = tree.get_child_optional("output")) read_output(rd, *s, cfg);
  if (const char* env = std::getenv("LORENTZ_SEED")) cfg.diffusion.seed = rd.unsigned_integer("LORENTZ_SEED", trim(env));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("{}: cannot open configuration file", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

SpacetimePtr make_config_spacetime(const RunConfig& cfg) { return make_spacetime(cfg.spacetime, cfg.parameters); }

Frame make_initial_frame(const Spacetime& st, const FrameSpec& spec) {
  const SpacetimePoint p{spec.chart, spec.point};
  Frame f;
  try {
    if (spec.preset == "tetrad" || spec.preset == "comoving") {
      f = tetrad_frame(st, p);
    } else if (spec.preset == "static-observer") {
      f = static_observer_frame(st, p);
    } else if (spec.preset == "circular") {
      f = circular_orbit_frame(st, spec.radius);
    } else if (spec.preset == "explicit") {
      st.check_domain(p);
      f = {p, spec.matrix};
      if (orthonormality_defect(st, f) > 1e-10 || !is_future_directed(st, f))
        throw ConfigError("frame.matrix: not an orthonormal future-directed frame at frame.point");
    } else {
      throw ConfigError(fmt::format("frame.preset: unknown preset '{}'", spec.preset));
    }
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("frame.point: {}", e.what()));
  }
  if (spec.boost != Vec3::Zero()) f = vertical_flow(f, spec.boost);
  return f;
}

}  // namespace reldiff
