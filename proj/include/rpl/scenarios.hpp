#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpl/dynamics.hpp"

namespace rpl {

enum class ScenarioKind { Linear, Mrac };
enum class FeatureKind { Identity, Constant };

std::string to_string(ScenarioKind kind);
std::string to_string(FeatureKind kind);

struct SineTerm {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;

  bool operator==(const SineTerm&) const = default;
};

/// r_k = sum_j a_j sin(w_j k + phase_j), the same signal on every input channel.
struct ReferenceSpec {
  std::vector<SineTerm> terms;

  Vector operator()(std::size_t k, std::size_t channels) const;
  bool operator==(const ReferenceSpec&) const = default;
};

/// r_k = sin(0.1 k) + 0.5 sin(0.3 k + 1)
ReferenceSpec default_reference();

/// Declarative system description. Linear scenarios are
///   x_{k+1} = A x_k + B (u_k - phi(x_k)^T theta*);
/// MRAC scenarios describe the plant (A, B), the reference model (A_r, B_r)
/// and are simulated as their tracking-error system.
struct ScenarioSpec {
  std::string name = "inline";
  ScenarioKind kind = ScenarioKind::Linear;
  Matrix a;
  Matrix b;
  Matrix a_ref;  // MRAC
  Matrix b_ref;  // MRAC
  std::optional<Matrix> k1;
  std::optional<Matrix> k2;
  FeatureKind feature = FeatureKind::Identity;
  Matrix feature_constant;  // p x m, FeatureKind::Constant
  Vector theta_star;
  /// Linear: initial state. MRAC: initial plant state, which is also the
  /// reference start, so the tracking error starts at zero.
  Vector x0;
  ReferenceSpec reference;

  // Per-scenario defaults for the experiment.
  Vector theta0;
  double epsilon = 1.0;
  double lambda_squared = 0.99;
  std::size_t horizon = 500;

  std::size_t state_dim() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(b.cols()); }
  std::size_t param_dim() const;
  /// Matrix of the linear nominal map: A for linear scenarios, A_r for MRAC.
  const Matrix& nominal_matrix() const { return kind == ScenarioKind::Mrac ? a_ref : a; }

  bool operator==(const ScenarioSpec& other) const;
};

/// Throws ValidationError naming the offending field.
void validate(const ScenarioSpec& spec);

struct BuiltScenario {
  ScenarioSpec spec;
  std::shared_ptr<const SystemModel> model;
  Vector initial_state;  // what the rollouts start from (the error e_0 for MRAC)
  std::optional<MracErrorSystem> mrac;
};

/// The model is valid for steps 0 .. horizon.
BuiltScenario build_scenario(const ScenarioSpec& spec, std::size_t horizon);

/// Names: "mrac-paper", "mrac-matched", "scalar-hand", "random-matched".
std::vector<std::string> builtin_scenario_names();

/// "random-matched" is drawn from `seed`; the others ignore it.
ScenarioSpec builtin_scenario(const std::string& name, std::uint64_t seed = 0);

inline constexpr double kMinReferenceExcitation = 0.05;

/// lambda_min of sum_{k < steps} xbar_k xbar_k^T along the reference model
/// started at x0 (MRAC scenarios).
double reference_excitation(const ScenarioSpec& spec, std::size_t steps);

/// A matched linear MRAC instance: stable A_r, full-rank B, A := A_r + B K1,
/// redrawn until reference_excitation over the first half of the horizon
/// reaches kMinReferenceExcitation.
ScenarioSpec random_matched_scenario(std::uint64_t seed);

}  // namespace rpl
