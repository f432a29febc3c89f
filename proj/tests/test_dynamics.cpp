#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <memory>

#include "rpl/dynamics.hpp"
#include "rpl/estimators.hpp"
#include "rpl/scenarios.hpp"

using rpl::Matrix;
using rpl::Vector;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec1(double v) { return Vector::Constant(1, v); }

rpl::SystemModel scalar_model(double a = 0.5) {
  return rpl::SystemModel(
      1, 1, 1, [a](std::size_t, const Vector& x) -> Vector { return a * x; },
      [](std::size_t, const Vector&) -> Matrix { return Matrix::Ones(1, 1); },
      [](std::size_t, const Vector&) -> Matrix { return Matrix::Ones(1, 1); }, vec1(1.0));
}

rpl::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rpl::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rpl::Error thrown";
  return rpl::Errc::ValidationError;
}

// Records how many observations it has seen each time it is asked for an
// estimate.
class SpyEstimator final : public rpl::Estimator {
 public:
  explicit SpyEstimator(std::shared_ptr<std::vector<std::size_t>> log) : log_(std::move(log)) {}
  Vector estimate() const override {
    log_->push_back(observed_);
    return vec1(0.0);
  }
  void observe(const Matrix&, const Matrix&, const Vector&) override { ++observed_; }
  std::unique_ptr<rpl::Estimator> clone() const override {
    return std::make_unique<SpyEstimator>(*this);
  }

 private:
  std::shared_ptr<std::vector<std::size_t>> log_;
  std::size_t observed_ = 0;
};

rpl::BuiltScenario paper(std::size_t horizon) {
  return rpl::build_scenario(rpl::builtin_scenario("mrac-paper"), horizon);
}

}  // namespace

TEST(ClosedLoopStep, ExactParameterFollowsNominal) {
  const auto built = paper(5);
  const Vector e{{0.3, -0.1}};
  const Vector theta_star{{0.75, 0.5}};
  const auto step = rpl::closed_loop_step(*built.model, 2, e, theta_star);
  EXPECT_LE((step.x_next - built.model->nominal(2, e)).norm(), 1e-15);
  EXPECT_LE((step.y - built.model->regressor(2, e) * theta_star).norm(), 1e-15);
}

TEST(ClosedLoopStep, ScalarHandValues) {
  const auto model = scalar_model();
  const auto step = rpl::closed_loop_step(model, 0, vec1(1.0), vec1(0.0));
  EXPECT_DOUBLE_EQ(step.x_next(0), -0.5);
  EXPECT_DOUBLE_EQ(step.u(0), 0.0);
  EXPECT_DOUBLE_EQ(step.y(0), 1.0);
}

TEST(ClosedLoopStep, MracMatchedCaseIsReferenceDynamics) {
  const auto built = paper(5);
  const Vector e{{0.2, 0.2}};
  const auto step = rpl::closed_loop_step(*built.model, 0, e, Vector{{0.75, 0.5}});
  const Matrix a_ref = mat2(-0.9929, 0.2253, -0.0569, 0.8117);
  EXPECT_LE((step.x_next - a_ref * e).norm(), 1e-15);
}

TEST(ClosedLoopStep, RejectsWrongParameterSize) {
  const auto model = scalar_model();
  EXPECT_THROW(rpl::closed_loop_step(model, 0, vec1(1.0), Vector::Zero(2)), rpl::Error);
}

TEST(Rollout, ZeroHorizonHasOnlyInitialState) {
  const auto model = scalar_model();
  const rpl::RplEstimator est(1.0, vec1(0.0));
  const auto run = rpl::rollout_closed_loop(model, est, vec1(1.0), 0);
  EXPECT_EQ(run.trajectory.states.size(), 1u);
  EXPECT_EQ(run.trajectory.states[0](0), 1.0);
  EXPECT_TRUE(run.trajectory.inputs.empty());
}

TEST(Rollout, TrueParameterReproducesBenchmark) {
  const auto built = rpl::build_scenario(rpl::builtin_scenario("mrac-matched"), 200);
  const rpl::RplEstimator est(1.0, Vector{{0.75, 0.5}});
  const Vector e0{{0.1, -0.2}};
  const auto closed = rpl::rollout_closed_loop(*built.model, est, e0, 200).trajectory;
  const auto bench = rpl::rollout_benchmark(*built.model, e0, 200);
  for (std::size_t k = 0; k <= 200; ++k)
    ASSERT_LE((closed.states[k] - bench.states[k]).norm(), 1e-12) << "k = " << k;
}

TEST(Rollout, ScalarHandSequence) {
  const auto model = scalar_model();
  const rpl::RplEstimator est(1.0, vec1(0.0));
  const auto run = rpl::rollout_closed_loop(model, est, vec1(1.0), 3);
  const auto& t = run.trajectory;
  const double xs[] = {1.0, -0.5, -0.75, -0.75 / 2.0 - 1.0 / 6.0};
  const double thetas[] = {0.0, 0.5, 5.0 / 6.0};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(t.states[k](0), xs[k], 1e-15);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(t.estimates[k](0), thetas[k], 1e-15);
  EXPECT_NEAR(run.final_estimator->estimate()(0), 23.0 / 24.0, 1e-15);
}

TEST(Rollout, EstimatorOnlySeesPastData) {
  const auto model = scalar_model();
  auto log = std::make_shared<std::vector<std::size_t>>();
  const SpyEstimator spy(log);
  rpl::rollout_closed_loop(model, spy, vec1(1.0), 25);
  ASSERT_EQ(log->size(), 25u);
  for (std::size_t k = 0; k < log->size(); ++k) EXPECT_EQ((*log)[k], k);
}

TEST(Rollout, ControllerArgumentIsNotMutated) {
  const auto model = scalar_model();
  const rpl::RplEstimator est(1.0, vec1(0.0));
  rpl::rollout_closed_loop(model, est, vec1(1.0), 10);
  EXPECT_EQ(est.state().k, 0u);
  EXPECT_EQ(est.estimate()(0), 0.0);
}

TEST(Rollout, DeterministicAndReplayable) {
  const auto built = paper(300);
  const rpl::RlsffEstimator est(1.0, 0.99, Vector{{5.0, -1.0}});
  const auto a = rpl::rollout_closed_loop(*built.model, est, built.initial_state, 300).trajectory;
  const auto b = rpl::rollout_closed_loop(*built.model, est, built.initial_state, 300).trajectory;
  for (std::size_t k = 0; k < a.states.size(); ++k) ASSERT_EQ(a.states[k], b.states[k]);
  EXPECT_LE(rpl::replay_deviation(*built.model, a), 1e-13);
}

TEST(Rollout, DivergenceReportsStep) {
  const auto model = scalar_model(1e200);
  const rpl::RplEstimator est(1.0, vec1(0.0));
  try {
    rpl::rollout_closed_loop(model, est, vec1(1.0), 10);
    FAIL() << "expected NonFiniteState";
  } catch (const rpl::Error& e) {
    EXPECT_EQ(e.code(), rpl::Errc::NonFiniteState);
    EXPECT_NE(std::string(e.what()).find("step "), std::string::npos);
  }
}

TEST(Benchmark, ScalarGeometricDecay) {
  const auto bench = rpl::rollout_benchmark(scalar_model(), vec1(1.0), 3);
  const double expected[] = {1.0, 0.5, 0.25, 0.125};
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(bench.states[k](0), expected[k]);
}

TEST(Benchmark, MracFromZeroErrorStaysZero) {
  const auto built = paper(100);
  const auto bench = rpl::rollout_benchmark(*built.model, built.initial_state, 100);
  for (const auto& e : bench.states) EXPECT_EQ(e.norm(), 0.0);
}

TEST(Benchmark, LinearNominalIsMatrixPower) {
  const auto built = paper(50);
  const Matrix a_ref = mat2(-0.9929, 0.2253, -0.0569, 0.8117);
  const Vector x0{{0.2, 0.2}};
  const auto bench = rpl::rollout_benchmark(*built.model, x0, 50);
  Matrix power = Matrix::Identity(2, 2);
  for (std::size_t k = 0; k <= 50; ++k) {
    EXPECT_LE((bench.states[k] - power * x0).norm(), 1e-14);
    power = a_ref * power;
  }
}

TEST(Mrac, IdenticalReferenceNeedsNoFeedback) {
  const Matrix a = mat2(0.5, 0.1, 0.0, 0.3);
  const Matrix b = Matrix{{1.0}, {2.0}};
  const auto gains = rpl::solve_matching(a, b, a, b);
  EXPECT_LE(gains.k1.norm(), 1e-15);
  EXPECT_NEAR(gains.k2(0, 0), 1.0, 1e-15);
  EXPECT_LE(gains.residual, 1e-15);
}

TEST(Mrac, PaperMatricesGains) {
  const auto spec = rpl::builtin_scenario("mrac-paper");
  const auto built = rpl::build_scenario(spec, 10);
  ASSERT_TRUE(built.mrac);
  EXPECT_NEAR(built.mrac->k2(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(built.mrac->k1(0, 0), 2.18763, 1e-5);
  EXPECT_NEAR(built.mrac->k1(0, 1), 0.86975, 1e-5);
  // A - A_r is not in the range of B for these digits.
  EXPECT_GT(built.mrac->matching_residual, 1.0);
  EXPECT_TRUE(built.mrac->residual_warning);
}

TEST(Mrac, ConstructedGainsAreRecovered) {
  const Matrix a = mat2(1.0314, 0.2526, 0.2526, 1.0314);
  const Matrix b = Matrix{{0.0314}, {0.2526}};
  const Matrix k1{{1.0, 1.0}};
  const auto gains = rpl::solve_matching(a, b, a - b * k1, b);
  EXPECT_NEAR(gains.k1(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(gains.k1(0, 1), 1.0, 1e-12);
  EXPECT_LE(gains.residual, 1e-14);
}

TEST(Mrac, MarginallyStableReferenceIsRejected) {
  // K1 = (1, 1) leaves an eigenvalue of A - B K1 at exactly 1.
  auto spec = rpl::builtin_scenario("mrac-paper");
  spec.a_ref = spec.a - spec.b * Matrix{{1.0, 1.0}};
  EXPECT_EQ(code_of([&] { rpl::build_scenario(spec, 10); }), rpl::Errc::UnstableReference);
}

TEST(Mrac, MatchedVariantHasZeroResidual) {
  const auto built = rpl::build_scenario(rpl::builtin_scenario("mrac-matched"), 10);
  EXPECT_EQ(built.mrac->matching_residual, 0.0);
  EXPECT_FALSE(built.mrac->residual_warning);
  EXPECT_LT(rpl::spectral_radius(built.spec.a_ref), 0.7);
}

TEST(Mrac, RankDeficientInputRejected) {
  EXPECT_EQ(code_of([] {
              rpl::solve_matching(Matrix::Identity(2, 2), Matrix::Zero(2, 1),
                                  Matrix::Identity(2, 2), Matrix::Zero(2, 1));
            }),
            rpl::Errc::NotFullColumnRank);
}

TEST(Mrac, FeaturesUseReferenceState) {
  const auto built = paper(10);
  const auto& xbar = *built.mrac->reference_states;
  ASSERT_EQ(xbar.size(), 11u);
  EXPECT_EQ(xbar[0], (Vector{{0.2, 0.2}}));
  const Vector e{{0.01, -0.02}};
  EXPECT_LE((built.model->features(3, e) - Matrix(e + xbar[3])).norm(), 0.0);
  EXPECT_THROW(built.model->features(11, e), rpl::Error);
}

TEST(Ediss, ZeroMapPassesWithUnitConstants) {
  const auto report = rpl::verify_ediss(
      [](std::size_t, const Vector& x) -> Vector { return Vector::Zero(x.size()); }, 2,
      rpl::EdissCertificate{1.0, 1.0, 0.5, 0}, 50, 1.0, 30, 3);
  EXPECT_TRUE(report.pass);
}

TEST(Ediss, HalvingMapWithRhoHalfPasses) {
  const auto half = [](std::size_t, const Vector& x) -> Vector { return 0.5 * x; };
  EXPECT_TRUE(rpl::verify_ediss(half, 1, {1.0, 1.0, 0.5, 0}, 100, 1.0, 60, 5).pass);
}

TEST(Ediss, HalvingMapWithRhoBelowHalfFails) {
  const auto half = [](std::size_t, const Vector& x) -> Vector { return 0.5 * x; };
  const auto report = rpl::verify_ediss(half, 1, {1.0, 1.0, 0.4, 0}, 100, 1.0, 60, 5);
  EXPECT_FALSE(report.pass);
  EXPECT_TRUE(report.first_violation_step.has_value());
}

TEST(Ediss, FitScaledIdentity) {
  const auto cert = rpl::fit_ediss_linear(Matrix(0.5 * Matrix::Identity(2, 2)), 0.5);
  EXPECT_DOUBLE_EQ(cert.rho, 0.75);
  EXPECT_NEAR(cert.c0, 1.0, 1e-15);
}

TEST(Ediss, FitJordanBlockMatchesDirectPowers) {
  const Matrix a = mat2(0.9, 0.5, 0.0, 0.9);
  const auto cert = rpl::fit_ediss_linear(a, 0.5, 1000);
  EXPECT_NEAR(cert.rho, 0.95, 1e-15);
  double direct = 0.0;
  Matrix power = Matrix::Identity(2, 2);
  for (int k = 0; k <= 1000; ++k) {
    direct = std::max(direct, Eigen::JacobiSVD<Matrix>(power).singularValues()(0) /
                                  std::pow(0.95, k));
    power = a * power;
  }
  EXPECT_NEAR(cert.c0, direct, 1e-9 * direct);
  const auto f = [a](std::size_t, const Vector& x) -> Vector { return a * x; };
  EXPECT_TRUE(rpl::verify_ediss(f, 2, cert, 200, 1.0, 300, 9).pass);
}

TEST(Ediss, PaperReferenceCertificateSurvivesMonteCarlo) {
  const Matrix a_ref = mat2(-0.9929, 0.2253, -0.0569, 0.8117);
  const auto cert = rpl::fit_ediss_linear(a_ref);
  const auto f = [a_ref](std::size_t, const Vector& x) -> Vector { return a_ref * x; };
  const auto report = rpl::verify_ediss(f, 2, cert, 1000, 1.0, 200, 21);
  EXPECT_TRUE(report.pass) << "worst margin " << report.worst_margin;
  EXPECT_EQ(report.trials, 1000u);
}

TEST(SpectralRadius, KnownValues) {
  EXPECT_NEAR(rpl::spectral_radius(mat2(0.0, 1.0, -1.0, 0.0)), 1.0, 1e-15);
  EXPECT_NEAR(rpl::spectral_radius(mat2(-0.9929, 0.2253, -0.0569, 0.8117)), 0.98577, 1e-5);
}
