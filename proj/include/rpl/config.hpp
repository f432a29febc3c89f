#pragma once

// Experiment configuration as a YAML document. Defaults are resolved at load
// time and written back explicitly by write_config.

#include <cstdint>
#include <filesystem>
#include <string>

#include "rpl/regret.hpp"
#include "rpl/scenarios.hpp"

namespace rpl {

struct OutputSettings {
  std::string directory = "out";
  bool csv = true;
  bool json = true;

  bool operator==(const OutputSettings&) const = default;
};

struct ExperimentConfig {
  ScenarioSpec scenario;
  bool scenario_inline = false;  // written back as a mapping rather than a name
  EstimatorConfig estimator;
  std::size_t horizon = 500;
  CostKind cost = CostKind::Quadratic;
  ExcitationSettings excitation;
  OutputSettings output;
  std::uint64_t seed = 0;
  double rho_margin = kDefaultRhoMargin;

  bool operator==(const ExperimentConfig& other) const;
};

bool operator==(const EstimatorConfig& a, const EstimatorConfig& b);
bool operator==(const ExcitationSettings& a, const ExcitationSettings& b);

/// A builtin scenario with the estimator, horizon and excitation defaults it
/// carries.
ExperimentConfig default_config(const std::string& scenario, std::uint64_t seed = 0);

/// Throws ValidationError naming the field.
void validate(const ExperimentConfig& config);

/// Throws ParseError (with the line number) on malformed YAML and
/// ValidationError on well-formed YAML with bad or unknown fields.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field explicit; doubles with 17 significant digits.
std::string write_config(const ExperimentConfig& config);

}  // namespace rpl
