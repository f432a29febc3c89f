#include "rpl/regret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rpl {

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::Quadratic: return "quadratic";
  }
  return "unknown";
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Rpl: return "rpl";
    case EstimatorKind::Rlsff: return "rlsff";
  }
  return "unknown";
}

double quadratic_cost(const Vector& x) { return x.squaredNorm(); }

double stage_cost(CostKind kind, const Vector& x) {
  switch (kind) {
    case CostKind::Quadratic: return quadratic_cost(x);
  }
  return 0.0;
}

double lipschitz_estimate(CostKind kind, double radius) {
  if (!(radius >= 0.0)) throw Error(Errc::ValidationError, "radius must be nonnegative");
  switch (kind) {
    case CostKind::Quadratic: return 2.0 * radius;
  }
  return 0.0;
}

RegretTrace regret_trace(const Trajectory& closed, const Trajectory& benchmark, CostKind cost) {
  if (closed.horizon != benchmark.horizon)
    throw Error(Errc::DimensionMismatch, "closed-loop and benchmark horizons differ");
  RegretTrace trace;
  trace.cost = cost;
  trace.per_step.reserve(closed.horizon);
  trace.cumulative.reserve(closed.horizon);
  double running = 0.0;
  for (std::size_t k = 0; k < closed.horizon; ++k) {
    const double r = stage_cost(cost, closed.states[k]) - stage_cost(cost, benchmark.states[k]);
    running += r;
    trace.per_step.push_back(r);
    trace.cumulative.push_back(running);
  }
  double radius = 0.0;
  for (const auto& x : closed.states) radius = std::max(radius, x.norm());
  for (const auto& x : benchmark.states) radius = std::max(radius, x.norm());
  trace.radius_used = kRadiusSafetyFactor * radius;
  trace.lipschitz_used = lipschitz_estimate(cost, trace.radius_used);
  return trace;
}

namespace {

void check_common(const BoundInputs& in) {
  auto nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!(in.rho > 0.0 && in.rho < 1.0)) throw Error(Errc::InvalidConstants, "rho must lie in (0, 1)");
  if (!nonneg(in.c0) || !nonneg(in.cw) || !nonneg(in.b) || !nonneg(in.lipschitz) ||
      !nonneg(in.theta0_error))
    throw Error(Errc::InvalidConstants, "bound constants must be finite and nonnegative");
}

double rho_power(const BoundInputs& in) {
  return in.horizon ? std::pow(in.rho, static_cast<double>(*in.horizon)) : 0.0;
}

double contraction_bound(const BoundInputs& in, double scale, double factor) {
  if (!(factor > 0.0 && factor < 1.0))
    throw Error(Errc::InvalidConstants, "contraction factor must lie in (0, 1)");
  const double one_minus_rho = 1.0 - in.rho;
  const double bracket =
      static_cast<double>(in.ts) / one_minus_rho +
      (rho_power(in) + (1.0 - factor) * in.rho + factor) /
          (one_minus_rho * one_minus_rho * (1.0 - factor));
  return in.cw * scale * in.lipschitz * in.theta0_error * bracket;
}

}  // namespace

double bound_rpl_basic(const BoundInputs& in) {
  check_common(in);
  return contraction_bound(in, in.b, in.constants.eta);
}

double bound_rpl_lifted(const BoundInputs& in) {
  check_common(in);
  if (!in.constants.gamma)
    throw Error(Errc::MissingGamma, "gamma is undefined: epsilon is not below epsilon_max");
  const double c_p = in.constants.c_p.value_or(0.0);
  if (!(c_p >= 0.0)) throw Error(Errc::InvalidConstants, "c_p must be nonnegative");
  return contraction_bound(in, c_p, *in.constants.gamma);
}

double bound_rlsff(const BoundInputs& in) {
  check_common(in);
  if (!in.lambda || !(*in.lambda > 0.0 && *in.lambda < 1.0))
    throw Error(Errc::InvalidConstants, "lambda must lie in (0, 1)");
  if (!in.constants.c_r || !(*in.constants.c_r > 0.0))
    throw Error(Errc::InvalidConstants, "c_r must be positive");
  const double one_minus_rho = 1.0 - in.rho;
  const double bracket = static_cast<double>(in.ts) / one_minus_rho +
                         *in.constants.c_r * (rho_power(in) + 1.0) /
                             (one_minus_rho * one_minus_rho * (1.0 - *in.lambda));
  return in.cw * in.b * in.lipschitz * in.theta0_error * bracket;
}

Certification certify(const RegretTrace& trace, double bound) {
  Certification out;
  out.regret = trace.total();
  out.bound = bound;
  out.pass = out.regret <= bound;
  out.slack_ratio =
      out.regret > 0.0 ? bound / out.regret : std::numeric_limits<double>::max();
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Estimator> make_estimator(const EstimatorConfig& config) {
  switch (config.kind) {
    case EstimatorKind::Rpl:
      return std::make_unique<RplEstimator>(config.epsilon, config.theta0);
    case EstimatorKind::Rlsff:
      return std::make_unique<RlsffEstimator>(config.epsilon, config.lambda_squared, config.theta0,
                                              config.allow_low_forgetting);
  }
  throw Error(Errc::ValidationError, "unknown estimator kind");
}

ExperimentResult run_experiment(const SystemModel& model, const EstimatorConfig& estimator,
                                const Vector& x0, std::size_t horizon, CostKind cost,
                                const ExcitationSettings& excitation) {
  ExperimentResult result;
  const auto controller = make_estimator(estimator);
  result.closed = rollout_closed_loop(model, *controller, x0, horizon).trajectory;
  result.benchmark = rollout_benchmark(model, x0, horizon);
  result.regret = regret_trace(result.closed, result.benchmark, cost);

  const FeatureStream stream = excitation_stream(result.closed);
  const double delta = excitation.delta ? *excitation.delta : default_delta(stream);
  result.excitation = excitation_report(stream, delta, excitation.ts_hint);
  return result;
}

BoundEvaluation evaluate_bounds(const SystemModel& model, const EstimatorConfig& estimator,
                                const ExperimentResult& result, const EdissCertificate& ediss) {
  BoundEvaluation eval;
  BoundInputs& in = eval.inputs;
  in.c0 = ediss.c0;
  in.cw = ediss.cw;
  in.rho = ediss.rho;
  in.horizon = result.closed.horizon;
  in.lipschitz = result.regret.lipschitz_used;
  for (const auto& r : result.closed.regressors) in.b = std::max(in.b, spectral_norm(r));
  in.theta0_error = (estimator.theta0 - TruthAccess::true_parameter(model)).norm();

  const ExcitationReport& ex = result.excitation;
  if (!(ex.delta_used > 0.0)) {
    eval.status = "no excitation: delta is zero";
    return eval;
  }
  const FeatureStream stream = excitation_stream(result.closed);

  if (estimator.kind == EstimatorKind::Rpl) {
    if (!ex.detected_ts) {
      eval.status = "sufficient excitation not reached within the horizon";
      return eval;
    }
    in.ts = *ex.detected_ts;
    in.constants = rpl_constants(ex.delta_used, estimator.epsilon, ex.beta_accumulated,
                                 stacked_norm(stream, in.ts));
    eval.rpl_basic = bound_rpl_basic(in);
    eval.selected = eval.rpl_basic;
    if (in.constants.gamma) {
      eval.rpl_lifted = bound_rpl_lifted(in);
      eval.selected = std::min(*eval.rpl_basic, *eval.rpl_lifted);
    }
  } else {
    if (!ex.pe_satisfied || !ex.pe_window_ts) {
      eval.status = "persistent excitation not reached within the horizon";
      return eval;
    }
    in.ts = *ex.pe_window_ts;
    in.lambda = std::sqrt(estimator.lambda_squared);
    in.constants.eta = estimator.epsilon / (ex.delta_used + estimator.epsilon);
    in.constants.c_r =
        rlsff_constant(estimator.epsilon, ex.delta_used, estimator.lambda_squared, in.ts);
    eval.rlsff = bound_rlsff(in);
    eval.selected = eval.rlsff;
  }
  eval.certification = certify(result.regret, *eval.selected);
  eval.status = "ok";
  return eval;
}

}  // namespace rpl
