#include "reldiff/cli.hpp"
#include "reldiff/montecarlo.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <limits>
#include <ostream>

namespace reldiff {

void to_json(json& j, const VerificationEntry& e) {
  j = json{{"spacetime", e.spacetime},     {"identity", e.identity}, {"max_residual", real(e.max_residual)},
           {"tolerance", real(e.tolerance)}, {"passed", e.passed},     {"n_frames", e.n_frames},
           {"note", e.note}};
}

void from_json(const json& j, VerificationEntry& e) {
  e.spacetime = j.at("spacetime").get<std::string>();
  e.identity = j.at("identity").get<std::string>();
  e.max_residual = get_real(j.at("max_residual"));
  e.tolerance = get_real(j.at("tolerance"));
  e.passed = j.at("passed").get<bool>();
  e.n_frames = j.at("n_frames").get<int>();
  e.note = j.at("note").get<std::string>();
}

void to_json(json& j, const VerificationReport& r) {
  j = json{{"entries", r.entries}, {"failures", r.failures}};
}

void from_json(const json& j, VerificationReport& r) {
  r.entries = j.at("entries").get<std::vector<VerificationEntry>>();
  r.failures = j.at("failures").get<std::size_t>();
}

namespace {

double max_abs(const Rank4& t) {
  double m = 0.0;
  for (int i = 0; i < 256; ++i) m = std::max(m, std::abs(t.data()[i]));
  return m;
}

// Entrywise relative error with the denominator floored at a tenth of the tensor scale.
double oracle_disagreement(const MetricData& a, const MetricData& o) {
  const double rs = max_abs(o.riemann);
  const double floor = std::max(0.1 * rs, 1e-10);
  double e = 0.0;
  for (int i = 0; i < 256; ++i)
    e = std::max(e, std::abs(a.riemann.data()[i] - o.riemann.data()[i]) /
                        std::max(std::abs(o.riemann.data()[i]), floor));
  for (int i = 0; i < 16; ++i)
    e = std::max(e, std::abs(a.ricci.data()[i] - o.ricci.data()[i]) / std::max(std::abs(o.ricci.data()[i]), floor));
  return e;
}

}  // namespace

VerificationReport run_verification(const RunConfig& cfg) {
  const ExperimentConfig& x = cfg.experiment;
  auto tol = [&](double t) { return x.tolerance ? *x.tolerance : t; };
  auto wants = [&](const char* id) { return std::find(x.identities.begin(), x.identities.end(), id) != x.identities.end(); };
  const std::vector<std::string> ids = x.spacetimes.empty() ? catalog_ids() : x.spacetimes;
  VerificationReport rep;
  auto add = [&](VerificationEntry e) {
    e.passed = e.max_residual <= e.tolerance;
    rep.failures += !e.passed;
    rep.entries.push_back(std::move(e));
  };

  for (const std::string& id : ids) {
    const SpacetimePtr st = make_spacetime(id);
    const std::vector<Frame> frames = sample_frames(*st, default_envelope(*st, x.n_frames, x.rapidity_max, x.frame_seed));
    double ric_scale = 0.0;
    for (const Frame& f : frames) ric_scale = std::max(ric_scale, std::abs(ric_tilde(*st, f)));
    const bool ricci_flat = ric_scale <= 1e-8;
    const int n = static_cast<int>(frames.size());

    if (wants("oracle")) {
      double worst = 0.0;
      for (const Frame& f : frames) worst = std::max(worst, oracle_disagreement(curvature(*st, f.point), curvature_oracle(*st, f.point)));
      add({id, "oracle", worst, tol(x.tol_oracle), true, n, "curvature against nested finite differences of the metric"});
    }
    for (const char* which : {"lemma9", "vertical"}) {
      if (!wants(which)) continue;
      const bool l9 = std::string(which) == "lemma9";
      double worst = 0.0;
      for (const Frame& f : frames) {
        const IdentityResidual r = l9 ? lemma9_residual(*st, f, cfg.diffusion.sigma) : vertical_residual(*st, f);
        worst = std::max(worst, ricci_flat ? r.residual : r.residual / r.scale);
      }
      add({id, which, worst, tol(ricci_flat ? x.tol_ricci_flat : (l9 ? x.tol_lemma9 : x.tol_vertical)), true, n,
           ricci_flat ? "absolute residual (Ricci-flat)" : "residual relative to |RIC~|"});
    }
    if (wants("poisson")) {
      const int m = std::min(x.poisson_frames, n);
      double worst = 0.0;
      bool converges = true;
      for (int i = 0; i < m; ++i) {
        const Frame& f = frames[i];
        converges = converges && compute_U_detail(*st, f).tail_converges;
        const double r = poisson_residual(*st, f);
        worst = std::max(worst, ricci_flat ? r : r / (2.0 * std::abs(ric_tilde(*st, f))));
      }
      add({id, "poisson", worst, tol(ricci_flat ? x.tol_ricci_flat : x.tol_poisson), true, m,
           converges ? "|(1/2) sum V_j^2 U + 2 RIC~|"
                     : "U diverges: RIC(y, y) grows like e^{2 rho} on the fiber; residual of the truncated integral"});
    }
  }
  if (wants("green")) {
    double worst = 0.0;
    int n = 0;
    for (double rho = 0.5; rho <= 10.0 + 1e-12; rho += 0.05, ++n)
      worst = std::max(worst, std::abs(radial_half_laplacian(green_h3, rho)));
    add({"-", "green", worst, tol(x.tol_green), true, n, "(1/2) Laplacian of G on rho in [0.5, 10]"});
  }
  return rep;
}

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out;
};

class Command {
 public:
  Command(const Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {
    cfg_ = load_config(g.config);
    if (g.seed) cfg_.diffusion.seed = *g.seed;
    st_ = make_config_spacetime(cfg_);
    opts_.threads = g.threads;
    opts_.progress = [this](std::size_t done, std::size_t total) { err_ << fmt::format("{} of {} paths\n", done, total); };
  }

  std::filesystem::path out_dir() const { return g_.out.empty() ? cfg_.output_dir : g_.out; }

  // Writes the files when an output directory is set, otherwise prints the JSON.
  void emit(const std::string& name, const json& j, const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    const std::filesystem::path dir = out_dir();
    if (dir.empty()) {
      out_ << dump(j);
      return;
    }
    atomic_write(dir / name, dump(j));
    for (const auto& [file, text] : extra) atomic_write(dir / file, text);
    err_ << "wrote " << (dir / name).string() << "\n";
  }

  int simulate() {
    const Frame f0 = make_initial_frame(*st_, cfg_.frame);
    const Trajectory tr = simulate_any(f0);
    json transitions = json::array();
    for (const ChartTransition& t : tr.transitions) transitions.push_back({{"s", real(t.s)}, {"from", t.from}, {"to", t.to}});
    const json summary{{"spacetime", st_->id()},
                       {"parameters", st_->parameters()},
                       {"config", cfg_.diffusion},
                       {"termination", verdict_string(tr.termination, tr.reason)},
                       {"zeta", real(tr.zeta)},
                       {"steps", tr.steps},
                       {"halvings", tr.halvings},
                       {"transitions", transitions},
                       {"initial_frame", frame_record(st_->id(), f0, orthonormality_defect(*st_, f0))},
                       {"final_frame", frame_record(st_->id(), to_frame(*st_, tr.final_state),
                                                    structural_defect(*st_, tr.final_state))},
                       {"trajectory_file", cfg_.trajectory_file}};
    std::filesystem::path dir = out_dir();
    if (dir.empty()) dir = ".";
    atomic_write(dir / cfg_.trajectory_file, trajectory_csv(tr));
    atomic_write(dir / cfg_.summary_file, dump(summary));
    out_ << dump(summary);
    return kExitOk;
  }

  int estimate() {
    const Frame f0 = make_initial_frame(*st_, cfg_.frame);
    const ExplosionReport r =
        estimate_explosion(*st_, cfg_.diffusion, f0, cfg_.experiment.n_paths, cfg_.experiment.sweep, opts_);
    emit("explosion.json", r, {{"explosion_sweep.csv", sweep_csv(r)}});
    return kExitOk;
  }

  int moments() {
    if (cfg_.experiment.times.empty()) throw ConfigError(cfg_.path + ": experiment.times: required by moments");
    const Frame f0 = make_initial_frame(*st_, cfg_.frame);
    const FiberFunctional F = make_functional(cfg_.experiment.functional, st_);
    const MomentCurve c = exponential_moment(*st_, F, cfg_.diffusion, f0, cfg_.experiment.n_paths, cfg_.experiment.times, opts_);
    emit("moments.json", c, {{"moments.csv", moment_csv(c)}});
    return kExitOk;
  }

  int tube() {
    const Frame f0 = make_initial_frame(*st_, cfg_.frame);
    const ExperimentConfig& x = cfg_.experiment;
    const TubeChart chart(st_, geodesic_core(*st_, f0, x.tube_length, x.tube_core_ds), x.tube_radius);
    const TubeReport r = tube_test(chart, cfg_.diffusion, x.n_paths, x.injectivity_samples, opts_);
    emit("tube.json", r);
    return kExitOk;
  }

  int check(std::string theorem) {
    const ExperimentConfig& x = cfg_.experiment;
    if (theorem.empty()) theorem = x.theorem;
    const double sigma = cfg_.diffusion.sigma;
    const std::vector<Frame> samples = sample_frames(*st_, default_envelope(*st_, x.n_frames, x.rapidity_max, x.frame_seed));
    CriterionReport r;
    if (theorem == "lemma7") {
      r = check_lemma7(*st_, make_functional(x.functional, st_), make_initial_frame(*st_, cfg_.frame), sigma, x.C, samples);
    } else if (theorem == "lemma11") {
      r = check_lemma11(*st_, make_functional(x.functional, st_), make_functional(x.functional_h, st_), x.c, x.c_prime,
                        sigma, samples);
    } else if (theorem == "thm8") {
      r = check_theorem8(*st_, sigma, x.C, samples);
    } else if (theorem == "thm12") {
      r = check_theorem12(*st_, sigma, x.alpha, x.c, x.c_prime, samples);
    } else {
      throw std::invalid_argument(fmt::format("unknown theorem '{}': expected lemma7, lemma11, thm8 or thm12", theorem));
    }
    emit(fmt::format("check_{}.json", theorem), r);
    return kExitOk;
  }

  int verify() {
    const VerificationReport r = run_verification(cfg_);
    for (const VerificationEntry& e : r.entries)
      if (!e.passed)
        err_ << fmt::format("FAIL {} {}: residual {:.3e} > tolerance {:.3e}\n", e.spacetime, e.identity, e.max_residual,
                            e.tolerance);
    emit("verify.json", r);
    return r.failures ? kExitVerifyFailed : kExitOk;
  }

 private:
  Trajectory simulate_any(const Frame& f0) const {
    SimulateOptions so;
    return run_path(*st_, cfg_.diffusion, f0, 0, so);
  }

  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
  RunConfig cfg_;
  SpacetimePtr st_;
  EnsembleOptions opts_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relativistic diffusions on Lorentzian frame bundles", "reldiff"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "run configuration (INI)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed, overriding the configuration and LORENTZ_SEED");
  app.add_option("--threads", g.threads, "worker threads (0: all)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "output directory");

  std::string theorem;
  auto* sim = app.add_subcommand("simulate", "one trajectory: CSV and summary JSON");
  auto* est = app.add_subcommand("estimate", "explosion probability with an s_max sweep");
  auto* chk = app.add_subcommand("check", "hypothesis checker report");
  chk->add_option("theorem", theorem, "lemma7, lemma11, thm8 or thm12");
  auto* ver = app.add_subcommand("verify", "identity and oracle residual sweep");
  auto* tub = app.add_subcommand("tube", "tube exit experiment around a geodesic");
  auto* mom = app.add_subcommand("moments", "Monte Carlo moment curve of a fiber functional");
  for (CLI::App* sub : {sim, est, chk, ver, tub, mom}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    Command cmd(g, out, err);
    if (sim->parsed()) return cmd.simulate();
    if (est->parsed()) return cmd.estimate();
    if (chk->parsed()) return cmd.check(theorem);
    if (ver->parsed()) return cmd.verify();
    if (tub->parsed()) return cmd.tube();
    return cmd.moments();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace reldiff
