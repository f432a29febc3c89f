#pragma once

// One experiment from a config to its result bundle: the per-step CSV table
// and the JSON summary.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpl/config.hpp"

namespace rpl {

struct RunOutput {
  ExperimentConfig config;
  BuiltScenario scenario;
  ExperimentResult result;
  EdissCertificate ediss;
  EdissReport ediss_check;
  BoundEvaluation bounds;
};

/// Builds the scenario, runs closed loop and benchmark, and evaluates the
/// bounds with a certificate fitted to the nominal matrix.
RunOutput run_config(const ExperimentConfig& config);

/// k, x_i, xstar_i, [xbar_i], theta_j, theta_err_norm, regret,
/// cumulative_regret, prefix_lambda_min. xbar is the reference-model state
/// of MRAC scenarios.
std::vector<std::string> csv_header(const RunOutput& run);

/// One row per step k = 0 .. T-1, values with 17 significant digits.
void write_csv(std::ostream& out, const RunOutput& run);

nlohmann::json summary_json(const RunOutput& run);

/// Writes <stem>.csv and/or <stem>.json into `directory` per the config's
/// formats; returns the paths written.
std::vector<std::filesystem::path> write_bundle(const RunOutput& run,
                                                const std::filesystem::path& directory,
                                                const std::string& stem);

struct Comparison {
  RunOutput rpl;
  RunOutput rlsff;
};

/// The same config run once with each estimator.
Comparison run_comparison(const ExperimentConfig& config);

/// k, [r, xbar_i], x_rpl_i, x_rlsff_i, err_norm_rpl, err_norm_rlsff,
/// cumulative_regret_rpl, cumulative_regret_rlsff. x is the plant state for
/// MRAC scenarios.
void write_comparison_csv(std::ostream& out, const Comparison& cmp);

nlohmann::json comparison_json(const Comparison& cmp);

nlohmann::json excitation_json(const ExcitationReport& report);

/// Minimal matplotlib script that plots the given CSV.
std::string plot_script(const std::string& csv_name, bool comparison);

/// "%.17g"
std::string format_double(double v);

}  // namespace rpl
