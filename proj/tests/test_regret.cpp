#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rpl/config.hpp"
#include "rpl/regret.hpp"
#include "rpl/scenarios.hpp"

using rpl::Matrix;
using rpl::Vector;

namespace {

rpl::BoundInputs unit_inputs() {
  rpl::BoundInputs in;
  in.c0 = in.cw = in.b = in.lipschitz = in.theta0_error = 1.0;
  in.rho = 0.5;
  in.ts = 2;
  in.constants.eta = 0.5;
  return in;
}

rpl::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rpl::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rpl::Error thrown";
  return rpl::Errc::ParseError;
}

struct Run {
  rpl::BuiltScenario built;
  rpl::EstimatorConfig estimator;
  rpl::ExperimentResult result;
};

Run run_builtin(const std::string& name, std::size_t horizon,
                rpl::EstimatorKind kind = rpl::EstimatorKind::Rpl) {
  const auto config = rpl::default_config(name);
  Run r{rpl::build_scenario(config.scenario, horizon), config.estimator, {}};
  r.estimator.kind = kind;
  r.result = rpl::run_experiment(*r.built.model, r.estimator, r.built.initial_state, horizon,
                                 rpl::CostKind::Quadratic);
  return r;
}

}  // namespace

TEST(Cost, QuadraticAndLipschitz) {
  EXPECT_EQ(rpl::quadratic_cost(Vector::Zero(3)), 0.0);
  EXPECT_EQ(rpl::quadratic_cost(Vector{{3.0, 4.0}}), 25.0);
  EXPECT_EQ(rpl::lipschitz_estimate(rpl::CostKind::Quadratic, 1.0), 2.0);
  EXPECT_THROW(rpl::lipschitz_estimate(rpl::CostKind::Quadratic, -1.0), rpl::Error);
}

TEST(Cost, LipschitzHoldsOnBall) {
  std::mt19937_64 rng(73);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = 2.5;
  const double lc = rpl::lipschitz_estimate(rpl::CostKind::Quadratic, radius);
  auto sample = [&] {
    Vector v = Vector::NullaryExpr(3, [&] { return normal(rng); });
    return Vector(v.normalized() * radius * std::cbrt(unit(rng)));
  };
  for (int i = 0; i < 100000; ++i) {
    const Vector x = sample();
    const Vector y = sample();
    ASSERT_LE(std::abs(rpl::quadratic_cost(x) - rpl::quadratic_cost(y)),
              lc * (x - y).norm() + 1e-12);
  }
}

TEST(Bounds, RplBasicExamples) {
  auto in = unit_inputs();
  EXPECT_DOUBLE_EQ(rpl::bound_rpl_basic(in), 10.0);
  in.theta0_error = 0.0;
  EXPECT_EQ(rpl::bound_rpl_basic(in), 0.0);
}

TEST(Bounds, MonotoneInExcitationTime) {
  auto in = unit_inputs();
  const double at2 = rpl::bound_rpl_basic(in);
  in.ts = 3;
  EXPECT_GT(rpl::bound_rpl_basic(in), at2);
}

TEST(Bounds, FiniteHorizonAddsRhoPower) {
  auto in = unit_inputs();
  in.horizon = 1;
  EXPECT_DOUBLE_EQ(rpl::bound_rpl_basic(in), 4.0 + (0.5 + 0.25 + 0.5) / (0.25 * 0.5));
}

TEST(Bounds, RplLiftedExamples) {
  auto in = unit_inputs();
  in.constants.c_p = 1.0;
  in.constants.gamma = 0.5;
  EXPECT_DOUBLE_EQ(rpl::bound_rpl_lifted(in), 10.0);
  in.theta0_error = 0.0;
  EXPECT_EQ(rpl::bound_rpl_lifted(in), 0.0);
}

TEST(Bounds, LiftedNeedsGamma) {
  auto in = unit_inputs();
  in.constants.c_p = 1.0;
  EXPECT_EQ(code_of([&] { rpl::bound_rpl_lifted(in); }), rpl::Errc::MissingGamma);
}

TEST(Bounds, RlsffExamples) {
  auto in = unit_inputs();
  in.lambda = 0.5;
  in.constants.c_r = 1.0;
  EXPECT_DOUBLE_EQ(rpl::bound_rlsff(in), 12.0);
  in.theta0_error = 0.0;
  EXPECT_EQ(rpl::bound_rlsff(in), 0.0);
}

TEST(Bounds, RlsffExceedsLiftedWhenGammaBelowLambda) {
  for (double gamma : {0.1, 0.5, 0.85}) {
    auto in = unit_inputs();
    in.constants.c_p = in.b;
    in.constants.gamma = gamma;
    in.lambda = 0.9;
    in.constants.c_r = 1.2;
    EXPECT_GT(rpl::bound_rlsff(in), rpl::bound_rpl_lifted(in)) << "gamma " << gamma;
  }
}

TEST(Bounds, RejectInvalidConstants) {
  auto in = unit_inputs();
  in.rho = 1.0;
  EXPECT_EQ(code_of([&] { rpl::bound_rpl_basic(in); }), rpl::Errc::InvalidConstants);
  in = unit_inputs();
  in.cw = -1.0;
  EXPECT_EQ(code_of([&] { rpl::bound_rpl_basic(in); }), rpl::Errc::InvalidConstants);
  in = unit_inputs();
  EXPECT_EQ(code_of([&] { rpl::bound_rlsff(in); }), rpl::Errc::InvalidConstants);
}

TEST(Certify, ZeroRegretPasses) {
  rpl::RegretTrace trace;
  trace.per_step = {0.0, 0.0};
  trace.cumulative = {0.0, 0.0};
  const auto c = rpl::certify(trace, 0.0);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.slack_ratio, std::numeric_limits<double>::max());
}

TEST(Experiment, TruthStartHasNoRegret) {
  const auto config = rpl::default_config("mrac-paper");
  const auto built = rpl::build_scenario(config.scenario, 200);
  auto est = config.estimator;
  est.theta0 = Vector{{0.75, 0.5}};
  const auto r = rpl::run_experiment(*built.model, est, built.initial_state, 200,
                                     rpl::CostKind::Quadratic);
  for (double v : r.regret.per_step) EXPECT_EQ(v, 0.0);
}

TEST(Experiment, ScalarHandRegret) {
  const auto r = run_builtin("scalar-hand", 3);
  ASSERT_EQ(r.result.regret.cumulative.size(), 3u);
  EXPECT_NEAR(r.result.regret.per_step[0], 0.0, 1e-15);
  EXPECT_NEAR(r.result.regret.per_step[1], 0.0, 1e-15);
  EXPECT_NEAR(r.result.regret.per_step[2], 0.5, 1e-15);
  EXPECT_NEAR(r.result.regret.total(), 0.5, 1e-12);
}

TEST(Experiment, MracRegretIsTrackingError) {
  const auto r = run_builtin("mrac-paper", 400);
  double sum = 0.0;
  for (std::size_t k = 0; k < 400; ++k) sum += r.result.closed.states[k].squaredNorm();
  EXPECT_NEAR(r.result.regret.total(), sum, 1e-12 * (1.0 + sum));
  for (const auto& e : r.result.benchmark.states) EXPECT_EQ(e.norm(), 0.0);
}

TEST(Experiment, RegretTraceRejectsHorizonMismatch) {
  const auto a = run_builtin("scalar-hand", 3);
  const auto b = run_builtin("scalar-hand", 4);
  EXPECT_THROW(rpl::regret_trace(a.result.closed, b.result.benchmark, rpl::CostKind::Quadratic),
               rpl::Error);
}

TEST(Certify, ScalarHandWithFittedConstantsPasses) {
  const auto r = run_builtin("scalar-hand", 3);
  const auto cert = rpl::fit_ediss_linear(Matrix::Constant(1, 1, 0.5));
  const auto eval = rpl::evaluate_bounds(*r.built.model, r.estimator, r.result, cert);
  ASSERT_EQ(eval.status, "ok");
  ASSERT_TRUE(eval.certification);
  EXPECT_TRUE(eval.certification->pass);
  EXPECT_NEAR(eval.inputs.theta0_error, 1.0, 1e-15);
}

// Shrinking |theta~_0| tenfold leaves the scalar fixture certified: the
// bound's floor over all admissible constants is far above R_3 = 0.5.
// Shrinking it past the measured slack does flip the verdict.
TEST(Certify, UnderstatedInitialErrorFlipsOnlyPastSlack) {
  const auto r = run_builtin("scalar-hand", 3);
  const auto cert = rpl::fit_ediss_linear(Matrix::Constant(1, 1, 0.5));
  const auto eval = rpl::evaluate_bounds(*r.built.model, r.estimator, r.result, cert);
  ASSERT_TRUE(eval.certification);
  const double slack = eval.certification->slack_ratio;
  ASSERT_GT(slack, 10.0);

  auto tenfold = eval.inputs;
  tenfold.theta0_error /= 10.0;
  EXPECT_TRUE(rpl::certify(r.result.regret, rpl::bound_rpl_basic(tenfold)).pass);

  auto past = eval.inputs;
  past.theta0_error /= 2.0 * slack;
  EXPECT_FALSE(rpl::certify(r.result.regret, rpl::bound_rpl_basic(past)).pass);
}

TEST(EvaluateBounds, RplConstantsOnMatchedScenario) {
  const auto r = run_builtin("mrac-matched", 2000);
  const auto config = rpl::default_config("mrac-matched");
  const auto cert = rpl::fit_ediss_linear(config.scenario.a_ref);
  const auto eval = rpl::evaluate_bounds(*r.built.model, r.estimator, r.result, cert);
  ASSERT_EQ(eval.status, "ok");
  ASSERT_TRUE(eval.inputs.constants.c_p);
  EXPECT_LE(*eval.inputs.constants.c_p,
            std::sqrt(r.result.excitation.beta_accumulated) * (1.0 + 1e-12));
  ASSERT_TRUE(eval.selected);
  EXPECT_LE(*eval.selected, *eval.rpl_basic);
  EXPECT_TRUE(eval.certification->pass);
}

TEST(EvaluateBounds, RlsffUsesPersistentWindow) {
  const auto r = run_builtin("mrac-matched", 2000, rpl::EstimatorKind::Rlsff);
  const auto config = rpl::default_config("mrac-matched");
  const auto cert = rpl::fit_ediss_linear(config.scenario.a_ref);
  const auto eval = rpl::evaluate_bounds(*r.built.model, r.estimator, r.result, cert);
  ASSERT_EQ(eval.status, "ok");
  ASSERT_TRUE(eval.rlsff);
  EXPECT_EQ(eval.inputs.ts, *r.result.excitation.pe_window_ts);
  EXPECT_NEAR(*eval.inputs.lambda, std::sqrt(0.99), 1e-15);
  EXPECT_TRUE(eval.certification->pass);
}

TEST(EvaluateBounds, NoExcitationMeansNoBound) {
  const auto r = run_builtin("mrac-paper", 50);
  const auto config = rpl::default_config("mrac-paper");
  const auto cert = rpl::fit_ediss_linear(config.scenario.a_ref);
  rpl::ExperimentResult quiet = r.result;
  quiet.excitation.delta_used = 0.0;
  const auto eval = rpl::evaluate_bounds(*r.built.model, r.estimator, quiet, cert);
  EXPECT_FALSE(eval.certification.has_value());
  EXPECT_NE(eval.status, "ok");
}
