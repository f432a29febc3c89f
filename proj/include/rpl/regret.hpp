#pragma once

// Paired closed-loop / benchmark experiments, empirical regret, and the
// finite-regret bounds for both estimators.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpl/dynamics.hpp"
#include "rpl/estimators.hpp"
#include "rpl/excitation.hpp"

namespace rpl {

enum class CostKind { Quadratic };

std::string to_string(CostKind kind);

/// c(x) = ||x||^2
double quadratic_cost(const Vector& x);

double stage_cost(CostKind kind, const Vector& x);

/// Lipschitz constant of the cost on the ball of radius R. For the quadratic
/// cost |c(x) - c(y)| <= (||x|| + ||y||) ||x - y|| gives 2R.
double lipschitz_estimate(CostKind kind, double radius);

inline constexpr double kRadiusSafetyFactor = 1.1;

struct RegretTrace {
  std::vector<double> per_step;    // c(x_k) - c(x*_k), k = 0 .. T-1
  std::vector<double> cumulative;  // R_{k+1}
  double lipschitz_used = 0.0;
  double radius_used = 0.0;
  CostKind cost = CostKind::Quadratic;

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Pointwise regret; the Lipschitz constant is evaluated on 1.1 times the
/// largest state norm seen on either trajectory.
RegretTrace regret_trace(const Trajectory& closed, const Trajectory& benchmark, CostKind cost);

struct BoundInputs {
  double c0 = 1.0;
  double cw = 1.0;
  double rho = 0.5;
  double b = 0.0;  // sup ||B_k phi_k^T|| along the run
  double lipschitz = 0.0;
  double theta0_error = 0.0;  // ||theta_0 - theta*||
  std::size_t ts = 0;
  ContractionConstants constants;
  std::optional<double> lambda;          // sqrt(lambda^2), RLSFF only
  std::optional<std::size_t> horizon;    // absent: T -> infinity, rho^T -> 0
};

/// c_w b L_c |theta~_0| (T_s/(1-rho) + (rho^T + (1-eta) rho + eta) / ((1-rho)^2 (1-eta)))
double bound_rpl_basic(const BoundInputs& in);

/// Same shape with c_p in place of b and gamma in place of eta. Throws
/// MissingGamma when gamma is absent (epsilon >= epsilon_max).
double bound_rpl_lifted(const BoundInputs& in);

/// c_w b L_c |theta~_0| (T_s/(1-rho) + c_r (rho^T + 1) / ((1-rho)^2 (1-lambda)))
double bound_rlsff(const BoundInputs& in);

struct Certification {
  bool pass = false;
  double regret = 0.0;
  double bound = 0.0;
  double slack_ratio = 0.0;  // bound / regret; max double when regret <= 0
};

Certification certify(const RegretTrace& trace, double bound);

// ---------------------------------------------------------------------------

enum class EstimatorKind { Rpl, Rlsff };

std::string to_string(EstimatorKind kind);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Rpl;
  double epsilon = 1.0;
  double lambda_squared = 0.99;
  Vector theta0;
  bool allow_low_forgetting = false;
};

std::unique_ptr<Estimator> make_estimator(const EstimatorConfig& config);

struct ExperimentResult {
  Trajectory closed;
  Trajectory benchmark;
  RegretTrace regret;
  ExcitationReport excitation;
};

struct ExcitationSettings {
  std::optional<double> delta;         // default: half the final prefix lambda_min
  std::optional<std::size_t> ts_hint;  // PE window; default: smallest passing
};

/// Closed loop and benchmark from the same x0, regret, and the excitation
/// report of the realized closed-loop regressors.
ExperimentResult run_experiment(const SystemModel& model, const EstimatorConfig& estimator,
                                const Vector& x0, std::size_t horizon, CostKind cost,
                                const ExcitationSettings& excitation = {});

struct BoundEvaluation {
  BoundInputs inputs;
  std::optional<double> rpl_basic;
  std::optional<double> rpl_lifted;
  std::optional<double> rlsff;
  std::optional<double> selected;  // smallest valid bound for the estimator used
  std::optional<Certification> certification;
  std::string status;  // "ok" or why no bound applies
};

/// Measures b, L_c, |theta~_0|, T_s and the contraction constants on the run
/// and evaluates the bounds for the estimator that produced it.
BoundEvaluation evaluate_bounds(const SystemModel& model, const EstimatorConfig& estimator,
                                const ExperimentResult& result, const EdissCertificate& ediss);

}  // namespace rpl
