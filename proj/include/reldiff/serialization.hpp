#pragma once

#include "reldiff/diffusion.hpp"
#include "reldiff/fiber.hpp"
#include "reldiff/montecarlo.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace reldiff {

using json = nlohmann::json;

// Non-finite reals are written as the strings "inf", "-inf" and "nan".
json real(double x);
double get_real(const json& j);

void to_json(json& j, const Frame& f);
void from_json(const json& j, Frame& f);
/// Flat frame record: spacetime id, chart, four coordinates, sixteen entries row-major, defect.
json frame_record(const std::string& spacetime, const Frame& f, double defect);

void to_json(json& j, const DiffusionConfig& c);
void from_json(const json& j, DiffusionConfig& c);

void to_json(json& j, const SweepPoint& p);
void from_json(const json& j, SweepPoint& p);
void to_json(json& j, const ExplosionReport& r);
void from_json(const json& j, ExplosionReport& r);
void to_json(json& j, const MomentCurve& c);
void from_json(const json& j, MomentCurve& c);
void to_json(json& j, const HittingReport& r);
void from_json(const json& j, HittingReport& r);
void to_json(json& j, const TubeReport& r);
void from_json(const json& j, TubeReport& r);

void to_json(json& j, const ClauseResult& c);
void from_json(const json& j, ClauseResult& c);
void to_json(json& j, const Witness& w);
void from_json(const json& j, Witness& w);
void to_json(json& j, const SamplingEnvelope& e);
void from_json(const json& j, SamplingEnvelope& e);
void to_json(json& j, const CriterionReport& r);
void from_json(const json& j, CriterionReport& r);

/// Verdict strings are "satisfied", "violated" and "inconclusive".
Verdict verdict_from_string(const std::string& s);

/// Indented JSON text with a trailing newline.
std::string dump(const json& j);

// CSV. Reals are written with 17 significant digits.

std::string format_real(double x);

/// Header `s,chart,x0,x1,x2,x3,e00,...,e33,defect`, one line per sample, then
/// `# termination=<verdict> zeta=<value>`.
std::string trajectory_csv(const Trajectory& tr);

struct TrajectoryTable {
  std::vector<TrajectorySample> samples;
  std::string verdict;
  double zeta = 0.0;
};
TrajectoryTable parse_trajectory_csv(const std::string& text);

/// `t,mean,se,n_alive`.
std::string moment_csv(const MomentCurve& c);
/// `s_max,n_exploded,p_hat,ci_low,ci_high`.
std::string sweep_csv(const ExplosionReport& r);

/// Writes to a temporary file in the same directory and renames it over the target.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace reldiff
