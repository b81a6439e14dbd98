#pragma once

#include "reldiff/diffusion.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reldiff {

/// Invalid configuration; the message names the file, line and key when known.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FrameSpec {
  std::string preset = "tetrad";  // tetrad | comoving | static-observer | circular | explicit
  int chart = 0;
  Vec4 point = Vec4::Zero();
  double radius = 0.0;             // circular
  Mat4 matrix = Mat4::Identity();  // explicit, coordinate components of e_0..e_3 as columns
  Vec3 boost = Vec3::Zero();       // applied after the preset: e <- e exp(sum b_j E_j)
};

struct ExperimentConfig {
  std::size_t n_paths = 100;
  std::vector<double> times;  // moments
  std::vector<double> sweep;  // estimate
  std::string functional = "MDOT0";
  std::string functional_h = "MDOT0_CAPPED";
  std::string theorem;
  double C = 1.0;
  double c = 1.0;
  double c_prime = 0.5;
  double alpha = 0.5;
  int n_frames = 100;
  double rapidity_max = 3.0;
  std::uint64_t frame_seed = 1;
  double tube_length = 1.0;
  double tube_radius = 0.5;
  double tube_core_ds = 0.05;
  int injectivity_samples = 200;
  // verify
  std::vector<std::string> spacetimes;  // empty: the whole catalog
  std::vector<std::string> identities{"oracle", "lemma9", "vertical", "green", "poisson"};
  double tol_oracle = 1e-5;
  double tol_lemma9 = 1e-4;
  double tol_vertical = 1e-4;
  double tol_ricci_flat = 1e-8;
  double tol_green = 1e-8;
  double tol_poisson = 1e-3;
  int poisson_frames = 3;
  std::optional<double> tolerance;  // overrides every tolerance above
};

struct RunConfig {
  std::string path;
  std::string spacetime = "minkowski";
  ParameterMap parameters;
  FrameSpec frame;
  DiffusionConfig diffusion;
  ExperimentConfig experiment;
  std::string output_dir;  // empty: not set
  std::string trajectory_file = "trajectory.csv";
  std::string summary_file = "summary.json";
};

/// Parses an INI file with sections [spacetime], [frame], [diffusion], [experiment], [output].
/// Unknown sections or keys, malformed numbers and out-of-range values throw ConfigError.
/// LORENTZ_SEED, when set, replaces diffusion.seed.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

SpacetimePtr make_config_spacetime(const RunConfig& cfg);
Frame make_initial_frame(const Spacetime& st, const FrameSpec& spec);

}  // namespace reldiff
