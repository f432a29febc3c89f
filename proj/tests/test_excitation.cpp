#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "rpl/excitation.hpp"
#include "rpl/oracles.hpp"

using rpl::FeatureStream;
using rpl::Matrix;
using rpl::Vector;

namespace {

Matrix e(int i) { return Matrix(Vector::Unit(2, i)); }

FeatureStream alternating(std::size_t n) {
  FeatureStream s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(e(static_cast<int>(i % 2)));
  return s;
}

rpl::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const rpl::Error& err) {
    return err.code();
  }
  ADD_FAILURE() << "no rpl::Error thrown";
  return rpl::Errc::ParseError;
}

}  // namespace

TEST(SeDetect, AlternatingBasis) {
  EXPECT_EQ(rpl::se_detect(alternating(6), 1.0), std::optional<std::size_t>(1));
}

TEST(SeDetect, RankDeficientNeverExcited) {
  const FeatureStream s(50, e(0));
  EXPECT_FALSE(rpl::se_detect(s, 1e-9).has_value());
  EXPECT_EQ(rpl::default_delta(s), 0.0);
}

TEST(SeDetect, RejectsNonPositiveDelta) {
  EXPECT_EQ(code_of([] { rpl::se_detect(alternating(4), 0.0); }), rpl::Errc::ValidationError);
}

TEST(SeDetect, AgreesWithBruteForce) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = rpl::oracle::random_stream(rng, 1 + trial % 4, 1 + trial % 2, 1, 30).features();
    const double delta = 0.05 + 0.1 * (trial % 7);
    EXPECT_EQ(rpl::se_detect(s, delta), rpl::oracle::brute_force_se(s, delta));
  }
}

TEST(PrefixLambdaMin, IsNondecreasing) {
  std::mt19937_64 rng(43);
  const auto s = rpl::oracle::random_stream(rng, 3, 2, 1, 100).features();
  const auto curve = rpl::prefix_lambda_min(s);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_GE(curve[k], curve[k - 1] - 1e-12);
}

TEST(PeCheck, AlternatingBasis) {
  const auto r = rpl::pe_check(alternating(10), 1.0, 1);
  EXPECT_TRUE(r.satisfied);
  EXPECT_EQ(r.window_lambda_min.size(), 9u);
}

TEST(PeCheck, StreamThatGoesQuietFails) {
  FeatureStream s = alternating(10);
  s.resize(20, Matrix::Zero(2, 1));
  EXPECT_FALSE(rpl::pe_check(s, 1.0, 1).satisfied);
  EXPECT_TRUE(rpl::se_detect(s, 1.0).has_value());
}

TEST(PeCheck, TooShortStream) {
  EXPECT_EQ(code_of([] { rpl::pe_check(alternating(2), 1.0, 2); }), rpl::Errc::StreamTooShort);
}

TEST(PeCheck, AgreesWithBruteForce) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 1 + trial % 3;
    const auto s = rpl::oracle::random_stream(rng, p, 1, 1, 25).features();
    const double delta = 0.02 + 0.05 * (trial % 5);
    const std::size_t ts = p + trial % 4;
    EXPECT_EQ(rpl::pe_check(s, delta, ts).satisfied, rpl::oracle::brute_force_pe(s, delta, ts));
  }
}

TEST(PeMinimalWindow, IsMinimal) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = rpl::oracle::random_stream(rng, 2, 1, 1, 40).features();
    const double delta = 0.05;
    const auto w = rpl::pe_minimal_window(s, delta);
    if (!w) {
      EXPECT_FALSE(rpl::oracle::brute_force_pe(s, delta, s.size() - 1));
      continue;
    }
    EXPECT_TRUE(rpl::oracle::brute_force_pe(s, delta, *w));
    if (*w > 0) EXPECT_FALSE(rpl::oracle::brute_force_pe(s, delta, *w - 1));
  }
}

TEST(PeMinimalWindow, PeriodicStream) {
  std::mt19937_64 rng(59);
  const auto s = rpl::oracle::periodic_stream(rng, 3, 1, 1, 5, 50).features();
  const double delta = 0.5 * rpl::oracle::window_lambda_min(s, 0, 5);
  const auto w = rpl::pe_minimal_window(s, delta);
  ASSERT_TRUE(w.has_value());
  EXPECT_LE(*w, 4u);
}

TEST(BetaEstimate, Examples) {
  EXPECT_DOUBLE_EQ(rpl::beta_estimate(FeatureStream{e(0)}).beta, 1.0);
  EXPECT_DOUBLE_EQ(rpl::beta_estimate(FeatureStream{e(0), e(1)}).beta, 1.0);
  FeatureStream geo;
  for (int i = 0; i < 60; ++i) geo.push_back(std::pow(0.5, i) * e(0));
  const auto b = rpl::beta_estimate(geo);
  EXPECT_NEAR(b.beta, 4.0 / 3.0, 1e-12);
  EXPECT_LT(b.tail_increment, 1e-12);
}

TEST(StackedNorm, MatchesSvdAndIsBelowSqrtBeta) {
  std::mt19937_64 rng(61);
  const auto stream = rpl::oracle::random_stream(rng, 3, 2, 2, 30);
  const auto s = stream.features();
  const Matrix phi = stream.history().prefix(11).stacked_phi();
  const double ref = Eigen::JacobiSVD<Matrix>(phi).singularValues()(0);
  EXPECT_NEAR(rpl::stacked_norm(s, 10), ref, 1e-12 * ref);
  EXPECT_LE(rpl::stacked_norm(s, 10), std::sqrt(rpl::beta_estimate(s).beta) + 1e-12);
}

TEST(RplConstants, Examples) {
  EXPECT_DOUBLE_EQ(rpl::rpl_constants(1.0, 1.0, 1.0).eta, 0.5);
  const auto c = rpl::rpl_constants(1.0, 0.5, 4.0);
  ASSERT_TRUE(c.epsilon_max.has_value());
  EXPECT_DOUBLE_EQ(*c.epsilon_max, 1.0);
  ASSERT_TRUE(c.gamma.has_value());
  EXPECT_NEAR(*c.gamma, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(*c.c_p, 2.0);
}

TEST(RplConstants, GammaAbsentAboveEpsilonMax) {
  EXPECT_FALSE(rpl::rpl_constants(1.0, 1.0, 4.0).gamma.has_value());
  EXPECT_FALSE(rpl::rpl_constants(1.0, 2.0, 4.0).gamma.has_value());
  const auto flat = rpl::rpl_constants(1.0, 100.0, 1.0);
  EXPECT_FALSE(flat.epsilon_max.has_value());
  EXPECT_TRUE(flat.gamma.has_value());
}

TEST(RplConstants, RejectsInconsistentInputs) {
  EXPECT_EQ(code_of([] { rpl::rpl_constants(2.0, 1.0, 1.0); }), rpl::Errc::InvalidConstants);
  EXPECT_EQ(code_of([] { rpl::rpl_constants(0.0, 1.0, 1.0); }), rpl::Errc::InvalidConstants);
  EXPECT_EQ(code_of([] { rpl::rpl_constants(1.0, 0.0, 1.0); }), rpl::Errc::InvalidConstants);
}

TEST(RlsffConstant, Examples) {
  EXPECT_NEAR(rpl::rlsff_constant(1.0, 1.0, 0.99, 1), std::sqrt(1.99), 1e-12);
  EXPECT_NEAR(rpl::rlsff_constant(1.0, 1.0, 0.99, 1), 1.41067, 1e-5);
  EXPECT_NEAR(std::pow(rpl::rlsff_constant(1.0, 2.0, 0.99, 1), 2), 0.995, 1e-12);
  EXPECT_NEAR(std::pow(rpl::rlsff_constant(3.0, 2.0, 0.9, 0), 2), 1.5, 1e-12);
}

TEST(RlsffConstant, RejectsBadInputs) {
  EXPECT_EQ(code_of([] { rpl::rlsff_constant(1.0, 1.0, 1.0, 1); }), rpl::Errc::InvalidConstants);
  EXPECT_EQ(code_of([] { rpl::rlsff_constant(1.0, 0.0, 0.9, 1); }), rpl::Errc::InvalidConstants);
}

TEST(ExcitationReport, DetectsBothConditionsOnPeriodicStream) {
  std::mt19937_64 rng(67);
  const auto s = rpl::oracle::periodic_stream(rng, 2, 2, 1, 3, 60).features();
  const double delta = 0.5 * rpl::oracle::window_lambda_min(s, 0, 3);
  const auto r = rpl::excitation_report(s, delta);
  ASSERT_TRUE(r.detected_ts.has_value());
  EXPECT_TRUE(r.pe_satisfied);
  ASSERT_TRUE(r.pe_window_ts.has_value());
  EXPECT_GE(*r.pe_window_ts, *r.detected_ts);
  EXPECT_EQ(r.prefix_lambda_min.size(), 60u);
  EXPECT_GE(r.beta_accumulated, r.prefix_lambda_min.back());
}

TEST(ExcitationReport, HintedWindowIsChecked) {
  const auto r = rpl::excitation_report(alternating(12), 1.0, std::size_t{3});
  EXPECT_EQ(r.pe_window_ts, std::optional<std::size_t>(3));
  EXPECT_TRUE(r.pe_satisfied);
}

TEST(ExcitationStream, TransposesStoredRegressors) {
  rpl::Trajectory t;
  t.regressors.push_back(Matrix{{1.0, 2.0, 3.0}});
  const auto s = rpl::excitation_stream(t);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].rows(), 3);
  EXPECT_EQ(s[0].cols(), 1);
  EXPECT_EQ(s[0](2, 0), 3.0);
}

// Lemma-1 style per-step contraction of the RPL error on random streams,
// with delta_k the prefix lambda_min measured at that step.
TEST(Contraction, RplErrorContractsByMeasuredDelta) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t p = 1 + trial % 4;
    const auto stream = rpl::oracle::random_stream(rng, p, 2, 1, 40);
    const auto features = stream.features();
    const auto curve = rpl::prefix_lambda_min(features);
    const double eps = 1.0;
    auto state = rpl::make_rpl_state(eps, Vector(Vector::Ones(static_cast<Eigen::Index>(p))));
    for (std::size_t k = 0; k < stream.size(); ++k) {
      const double before = (state.theta - stream.theta_star).norm();
      state = rpl::rpl_step(state, stream.phi[k], stream.b[k], stream.y[k]);
      const double after = (state.theta - stream.theta_star).norm();
      const double delta_k = std::max(0.0, curve[k]);
      ASSERT_LE(after, eps / (delta_k + eps) * before + 1e-9)
          << "trial " << trial << " k " << k;
    }
  }
}
