#include "reldiff/cli.hpp"
#include "reldiff/config.hpp"
#include "reldiff/serialization.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace reldiff;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reldiff");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string config_path(const std::string& name) { return std::string(RELDIFF_CONFIG_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("reldiff_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.ini";
  atomic_write(p, text);
  return p.string();
}

}  // namespace

TEST_CASE("simulate minkowski writes trajectory and summary") {
  const fs::path dir = scratch("sim");
  const Run r = cli({"--config", config_path("minkowski.ini"), "--out", dir.string(), "simulate"});
  REQUIRE(r.code == kExitOk);
  const json summary = json::parse(r.out);
  CHECK(summary.at("termination") == "BudgetExhausted");
  CHECK(get_real(summary.at("zeta")) == doctest::Approx(10.0));
  CHECK(json::parse(read_file(dir / "summary.json")) == summary);

  const std::string csv = read_file(dir / "trajectory.csv");
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header ==
        "s,chart,x0,x1,x2,x3,e00,e01,e02,e03,e10,e11,e12,e13,e20,e21,e22,e23,e30,e31,e32,e33,defect");
  const TrajectoryTable t = parse_trajectory_csv(csv);
  CHECK(t.verdict == "BudgetExhausted");
  CHECK(t.zeta == doctest::Approx(10.0));
  // stride 10 at ds = 0.01 over s_max = 10: s = 0, 0.1, ..., 10
  REQUIRE(t.samples.size() == 101);
  CHECK(t.samples.front().s == 0.0);
  CHECK(t.samples.back().s == doctest::Approx(10.0));

  // the CSV carries the same numbers as a library run
  RunConfig cfg = load_config(config_path("minkowski.ini"));
  const SpacetimePtr st = make_config_spacetime(cfg);
  const Trajectory tr = run_path(*st, cfg.diffusion, make_initial_frame(*st, cfg.frame), 0, SimulateOptions{});
  REQUIRE(tr.samples.size() == t.samples.size());
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    CHECK(tr.samples[i].s == t.samples[i].s);
    CHECK(tr.samples[i].frame == t.samples[i].frame);
    CHECK(tr.samples[i].defect == t.samples[i].defect);
  }
  CHECK(parse_trajectory_csv(trajectory_csv(tr)).samples.size() == tr.samples.size());
  CHECK(json::parse(read_file(dir / "summary.json")).at("final_frame").at("coords")[0] ==
        json(tr.samples.back().frame.point.coords[0]));
}

TEST_CASE("simulate inside the schwarzschild horizon exits the chart before pi M") {
  const fs::path dir = scratch("interior");
  const Run r = cli({"--config", config_path("schwarzschild_interior.ini"), "--out", dir.string(), "simulate"});
  REQUIRE(r.code == kExitOk);
  const json summary = json::parse(r.out);
  CHECK(summary.at("termination") == "Exploded(ChartExit)");
  const double zeta = get_real(summary.at("zeta"));
  CHECK(zeta > 0.0);
  CHECK(zeta <= M_PI);
  CHECK(json::parse(read_file(dir / "summary.json")).at("final_frame").at("coords")[1].get<double>() <= 1e-3);
}

TEST_CASE("invalid sigma exits 2 naming the key") {
  const fs::path dir = scratch("badsigma");
  const std::string path = write_config(dir, "[spacetime]\nid = minkowski\n\n[diffusion]\nsigma = -1\n");
  const Run r = cli({"--config", path, "simulate"});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("diffusion.sigma") != std::string::npos);
  CHECK(r.err.find("run.ini:5") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == kExitInvalid);
  CHECK(cli({"--config", "/nonexistent/reldiff.ini", "simulate"}).code == kExitInvalid);
  CHECK(cli({"--config", config_path("minkowski.ini")}).code == kExitInvalid);
  CHECK(cli({"--config", config_path("minkowski.ini"), "frobnicate"}).code == kExitInvalid);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("estimate on minkowski: no explosions, byte-identical reruns") {
  const fs::path a = scratch("est_a"), b = scratch("est_b");
  const Run ra = cli({"--config", config_path("minkowski.ini"), "--out", a.string(), "estimate"});
  const Run rb = cli({"--config", config_path("minkowski.ini"), "--out", b.string(), "--threads", "3", "estimate"});
  REQUIRE(ra.code == kExitOk);
  REQUIRE(rb.code == kExitOk);
  const std::string ja = read_file(a / "explosion.json");
  CHECK(ja == read_file(b / "explosion.json"));
  CHECK(read_file(a / "explosion_sweep.csv") == read_file(b / "explosion_sweep.csv"));
  const ExplosionReport rep = json::parse(ja).get<ExplosionReport>();
  CHECK(rep.n_paths == 100);
  CHECK(rep.n_exploded == 0);
  CHECK(rep.ci_low == 0.0);
  CHECK(rep.ci_high < 0.04);
  CHECK(rep.sweep.size() == 5);
  CHECK(read_file(a / "explosion_sweep.csv").rfind("s_max,n_exploded,p_hat,ci_low,ci_high\n", 0) == 0);
}

TEST_CASE("n_paths = 0 is rejected") {
  const fs::path dir = scratch("npaths");
  const std::string path = write_config(dir, "[experiment]\nn_paths = 0\n");
  const Run r = cli({"--config", path, "estimate"});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("experiment.n_paths") != std::string::npos);
}

TEST_CASE("check thm8 on minkowski is violated with a witness") {
  const Run r = cli({"--config", config_path("check_thm8.ini"), "check"});
  REQUIRE(r.code == kExitOk);
  const CriterionReport rep = json::parse(r.out).get<CriterionReport>();
  CHECK(rep.verdict == Verdict::Violated);
  CHECK(rep.failing_clause == "2");
  REQUIRE(!rep.witnesses.empty());
  CHECK(rep.witnesses.front().clause == "2");
}

TEST_CASE("check thm12 accepts the sigma window") {
  const Run r = cli({"--config", config_path("check_thm12.ini"), "check", "thm12"});
  REQUIRE(r.code == kExitOk);
  const CriterionReport rep = json::parse(r.out).get<CriterionReport>();
  const ClauseResult* w = rep.clause("window");
  REQUIRE(w != nullptr);
  CHECK(w->verdict == Verdict::Satisfied);
  CHECK(w->margin == doctest::Approx(std::sqrt(0.75) - 0.8));
}

TEST_CASE("unknown theorem exits 2") {
  const Run r = cli({"--config", config_path("check_thm8.ini"), "check", "thm99"});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("thm99") != std::string::npos);
}

TEST_CASE("verify with tolerance 0 fails and lists every residual") {
  const fs::path dir = scratch("verify0");
  const std::string path = write_config(dir,
                                        "[experiment]\nspacetimes = schwarzschild de_sitter\n"
                                        "identities = oracle lemma9 vertical\nn_frames = 10\ntolerance = 0\n");
  const Run r = cli({"--config", path, "--out", dir.string(), "verify"});
  CHECK(r.code == kExitVerifyFailed);
  const VerificationReport rep = json::parse(read_file(dir / "verify.json")).get<VerificationReport>();
  CHECK(rep.entries.size() == 6);
  for (const VerificationEntry& e : rep.entries) {
    CHECK(e.tolerance == 0.0);
    CHECK(std::isfinite(e.max_residual));
    if (e.max_residual > 0.0) CHECK(r.err.find(e.spacetime + " " + e.identity) != std::string::npos);
  }
  CHECK(rep.failures > 0);
}

TEST_CASE("verify on schwarzschild alone passes with residuals below 1e-8") {
  const Run r = cli({"--config", config_path("verify_schwarzschild.ini"), "verify"});
  CHECK(r.code == kExitOk);
  const VerificationReport rep = json::parse(r.out).get<VerificationReport>();
  CHECK(rep.failures == 0);
  REQUIRE(rep.entries.size() == 3);
  for (const VerificationEntry& e : rep.entries) CHECK(e.max_residual < 1e-8);
}

TEST_CASE("verify over the catalog fails only on the poisson equation of non-vacuum spacetimes") {
  // U diverges on a fiber where RIC(y, y) grows like e^{2 rho}; the truncated integral cannot satisfy it
  const Run r = cli({"--config", config_path("verify.ini"), "verify"});
  CHECK(r.code == kExitVerifyFailed);
  const VerificationReport rep = json::parse(r.out).get<VerificationReport>();
  CHECK(rep.failures == 3);
  for (const VerificationEntry& e : rep.entries) {
    if (e.passed) continue;
    CHECK(e.identity == "poisson");
    CHECK(e.spacetime != "minkowski");
    CHECK(e.spacetime != "schwarzschild");
  }
}

TEST_CASE("moments and tube write their reports") {
  const fs::path dir = scratch("mt");
  const std::string path = write_config(dir,
                                        "[diffusion]\nsigma = 0.5\nds = 0.01\ns_max = 1\n\n"
                                        "[experiment]\nn_paths = 50\ntimes = 0.5, 1\ntube_length = 0.5\n"
                                        "injectivity_samples = 20\n");
  REQUIRE(cli({"--config", path, "--out", dir.string(), "moments"}).code == kExitOk);
  const MomentCurve c = json::parse(read_file(dir / "moments.json")).get<MomentCurve>();
  CHECK(c.times == std::vector<double>{0.5, 1.0});
  CHECK(read_file(dir / "moments.csv").rfind("t,mean,se,n_alive\n", 0) == 0);
  REQUIRE(cli({"--config", path, "--out", dir.string(), "tube"}).code == kExitOk);
  const TubeReport t = json::parse(read_file(dir / "tube.json")).get<TubeReport>();
  CHECK(t.n_paths == 50);
  CHECK(t.far_cap + t.lateral + t.near_cap + t.exploded + t.inside == 50);

  const std::string no_times = write_config(dir, "[experiment]\nn_paths = 5\n");
  CHECK(cli({"--config", no_times, "moments"}).code == kExitInvalid);
}

TEST_CASE("report JSON round trips") {
  const SpacetimePtr st = make_spacetime("schwarzschild");
  const Frame f0 = static_observer_frame(*st, SpacetimePoint{0, Vec4(0.0, 8.0, 1.2, 0.4)});
  DiffusionConfig cfg;
  cfg.sigma = 0.7;
  cfg.ds = 0.02;
  cfg.s_max = 0.5;
  cfg.seed = 11;

  CHECK(json(cfg).get<DiffusionConfig>() == cfg);
  CHECK(json(f0).get<Frame>() == f0);

  const ExplosionReport e = estimate_explosion(*st, cfg, f0, 8);
  CHECK(json::parse(dump(e)).get<ExplosionReport>() == e);

  const MomentCurve m = exponential_moment(*st, make_functional("MDOT0", st), cfg, f0, 8, {0.1, 0.5});
  CHECK(json::parse(dump(m)).get<MomentCurve>() == m);

  const HittingReport h = hitting_stats(*st, cfg, f0, 8, region_r_below(7.9));
  // quantiles are NaN when nothing hits, so compare the text
  CHECK(dump(json::parse(dump(h)).get<HittingReport>()) == dump(h));

  const TubeChart tube(st, geodesic_core(*st, f0, 0.3, 0.05), 0.2);
  const TubeReport t = tube_test(tube, cfg, 8, 10);
  CHECK(json::parse(dump(t)).get<TubeReport>() == t);

  const CriterionReport c = check_theorem8(*st, 1.0, 1.0, sample_frames(*st, default_envelope(*st, 5)));
  CHECK(json::parse(dump(c)).get<CriterionReport>() == c);

  VerificationReport v;
  v.entries.push_back({"de_sitter", "poisson", std::numeric_limits<double>::infinity(), 1e-3, false, 3, "note"});
  v.failures = 1;
  CHECK(json::parse(dump(v)).get<VerificationReport>() == v);
  CHECK(json::parse(dump(v)).at("entries")[0].at("max_residual") == "inf");
}

TEST_CASE("config diagnostics carry the line number") {
  CHECK_THROWS_WITH_AS(parse_config("[diffusion]\nsigma = 1\nsgima = 2\n", "x.ini"),
                       "x.ini:3: diffusion.sgima: unknown key", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[difusion]\nsigma = 1\n", "x.ini"), "x.ini:1: difusion: unknown section", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[diffusion]\nds = fast\n", "x.ini"), "x.ini:2: diffusion.ds: 'fast' is not a number",
                       ConfigError);
  CHECK_THROWS_AS(parse_config("[frame]\npoint = 1 2 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[spacetime]\nid = anti_de_sitter\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\nidentities = lemma9 lemma10\n"), ConfigError);

  const RunConfig cfg = parse_config("; comment\n[spacetime]\nid = schwarzschild\nM = 2\n# also a comment\n[output]\ndir = out\n");
  CHECK(cfg.spacetime == "schwarzschild");
  CHECK(cfg.parameters.at("M") == 2.0);
  CHECK(cfg.output_dir == "out");
}

TEST_CASE("explicit frames are checked") {
  RunConfig cfg = parse_config("[frame]\npreset = explicit\nmatrix = 1 0 0 0  0 1 0 0  0 0 1 0  0 0 0 1\n");
  const SpacetimePtr st = make_config_spacetime(cfg);
  CHECK(make_initial_frame(*st, cfg.frame) == tetrad_frame(*st, SpacetimePoint{0, Vec4::Zero()}));
  cfg = parse_config("[frame]\npreset = explicit\nmatrix = -1 0 0 0  0 1 0 0  0 0 1 0  0 0 0 1\n");
  CHECK_THROWS_AS(make_initial_frame(*st, cfg.frame), ConfigError);
  cfg = parse_config("[frame]\npreset = explicit\nmatrix = 1 0 0 0  0 2 0 0  0 0 1 0  0 0 0 1\n");
  CHECK_THROWS_AS(make_initial_frame(*st, cfg.frame), ConfigError);
}

TEST_CASE("LORENTZ_SEED overrides the configured seed and --seed overrides both") {
  ::setenv("LORENTZ_SEED", "4242", 1);
  const RunConfig cfg = load_config(config_path("minkowski.ini"));
  CHECK(cfg.diffusion.seed == 4242);
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  REQUIRE(cli({"--config", config_path("minkowski.ini"), "--out", a.string(), "simulate"}).code == kExitOk);
  ::setenv("LORENTZ_SEED", "oops", 1);
  CHECK_THROWS_AS(load_config(config_path("minkowski.ini")), ConfigError);
  ::unsetenv("LORENTZ_SEED");
  REQUIRE(cli({"--config", config_path("minkowski.ini"), "--out", b.string(), "--seed", "4242", "simulate"}).code ==
          kExitOk);
  CHECK(read_file(a / "trajectory.csv") == read_file(b / "trajectory.csv"));
  const fs::path c = scratch("seed_c");
  REQUIRE(cli({"--config", config_path("minkowski.ini"), "--out", c.string(), "simulate"}).code == kExitOk);
  CHECK(read_file(a / "trajectory.csv") != read_file(c / "trajectory.csv"));
}

TEST_CASE("the installed binary runs") {
  const fs::path dir = scratch("binary");
  const std::string cmd = std::string("\"") + RELDIFF_CLI_PATH + "\" --config \"" + config_path("minkowski.ini") +
                          "\" --out \"" + dir.string() + "\" simulate > \"" + (dir / "stdout.txt").string() + "\"";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(json::parse(read_file(dir / "stdout.txt")).at("termination") == "BudgetExhausted");
  const std::string bad = std::string("\"") + RELDIFF_CLI_PATH + "\" --config \"" + config_path("minkowski.ini") +
                          "\" check thm99 2> /dev/null";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == kExitInvalid);
}
