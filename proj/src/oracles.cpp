#include "rpl/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "rpl/config.hpp"
#include "rpl/regret.hpp"
#include "rpl/scenarios.hpp"

namespace rpl::oracle {

namespace {

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return Matrix::NullaryExpr(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                             [&] { return normal(rng); });
}

double relative(const Vector& a, const Vector& reference) {
  const double scale = reference.norm();
  const double diff = (a - reference).norm();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace

FeatureStream RandomStream::features() const {
  FeatureStream out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(phi[i] * b[i].transpose());
  return out;
}

RegressionHistory<double> RandomStream::history() const {
  RegressionHistory<double> h(static_cast<std::size_t>(theta_star.size()));
  for (std::size_t i = 0; i < size(); ++i) h.push(phi[i], b[i], y[i]);
  return h;
}

RandomStream random_stream(std::mt19937_64& rng, std::size_t p, std::size_t n, std::size_t m,
                           std::size_t horizon) {
  RandomStream s;
  s.theta_star = gaussian(rng, p, 1);
  for (std::size_t i = 0; i < horizon; ++i) {
    s.phi.push_back(gaussian(rng, p, m));
    s.b.push_back(gaussian(rng, n, m));
    s.y.push_back(s.b.back() * s.phi.back().transpose() * s.theta_star);
  }
  return s;
}

RandomStream periodic_stream(std::mt19937_64& rng, std::size_t p, std::size_t n, std::size_t m,
                             std::size_t period, std::size_t horizon) {
  RandomStream s;
  s.theta_star = gaussian(rng, p, 1);
  std::vector<Matrix> phis;
  std::vector<Matrix> bs;
  for (std::size_t j = 0; j < period; ++j) {
    phis.push_back(gaussian(rng, p, m));
    bs.push_back(gaussian(rng, n, m));
  }
  for (std::size_t i = 0; i < horizon; ++i) {
    s.phi.push_back(phis[i % period]);
    s.b.push_back(bs[i % period]);
    s.y.push_back(s.b.back() * s.phi.back().transpose() * s.theta_star);
  }
  return s;
}

double window_lambda_min(const FeatureStream& stream, std::size_t begin, std::size_t end) {
  const auto p = stream.front().rows();
  Matrix g = Matrix::Zero(p, p);
  for (std::size_t i = begin; i < end; ++i) g += stream[i] * stream[i].transpose();
  g = (0.5 * (g + g.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(g, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

std::optional<std::size_t> brute_force_se(const FeatureStream& stream, double delta) {
  for (std::size_t k = 0; k < stream.size(); ++k)
    if (window_lambda_min(stream, 0, k + 1) >= delta) return k;
  return std::nullopt;
}

bool brute_force_pe(const FeatureStream& stream, double delta, std::size_t window_ts) {
  const std::size_t length = window_ts + 1;
  if (stream.size() < length) return false;
  for (std::size_t k0 = 0; k0 + length <= stream.size(); ++k0)
    if (window_lambda_min(stream, k0, k0 + length) < delta) return false;
  return true;
}

ScalarScript scalar_hand_script(std::size_t horizon) {
  constexpr double eps = 1.0;
  constexpr double theta_star = 1.0;
  ScalarScript s;
  double theta = 0.0;
  double x = 1.0;
  double x_star = 1.0;
  double sum_y = 0.0;
  double regret = 0.0;
  s.theta.push_back(theta);
  s.x.push_back(x);
  s.x_star.push_back(x_star);
  for (std::size_t k = 0; k < horizon; ++k) {
    regret += x * x - x_star * x_star;
    s.cumulative_regret.push_back(regret);
    const double x_next = 0.5 * x + (theta - theta_star);
    const double y = -x_next + 0.5 * x + theta;
    sum_y += y;
    theta = (sum_y + eps * theta) / (static_cast<double>(k) + 1.0 + eps);
    x = x_next;
    x_star = 0.5 * x_star;
    s.theta.push_back(theta);
    s.x.push_back(x);
    s.x_star.push_back(x_star);
  }
  return s;
}

double rpl_recursive_vs_batch(const RandomStream& stream, double epsilon, const Vector& theta0) {
  auto state = make_rpl_state(epsilon, theta0);
  RegressionHistory<double> history(static_cast<std::size_t>(theta0.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Vector prev = state.theta;
    state = rpl_step(std::move(state), stream.phi[i], stream.b[i], stream.y[i]);
    history.push(stream.phi[i], stream.b[i], stream.y[i]);
    worst = std::max(worst, relative(state.theta, rpl_batch_oracle(history, prev, epsilon)));
  }
  return worst;
}

double rlsff_recursive_vs_batch(const RandomStream& stream, double epsilon, double lambda_squared,
                                const Vector& theta0) {
  auto state = make_rlsff_state(epsilon, lambda_squared, theta0);
  RegressionHistory<double> history(static_cast<std::size_t>(theta0.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    state = rlsff_step(std::move(state), stream.phi[i], stream.b[i], stream.y[i]);
    history.push(stream.phi[i], stream.b[i], stream.y[i]);
    worst = std::max(worst, relative(state.theta,
                                     rlsff_batch_oracle(history, theta0, epsilon, lambda_squared)));
  }
  return worst;
}

std::vector<Check> run_all(std::uint64_t seed, std::size_t streams) {
  std::vector<Check> checks;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pdim(1, 5);
  std::uniform_int_distribution<std::size_t> ndim(1, 3);
  std::uniform_int_distribution<std::size_t> len(1, 200);

  {
    Check c{"rpl recursive matches batch", false, 0.0, 1e-9, ""};
    for (std::size_t s = 0; s < streams; ++s) {
      const auto p = pdim(rng), n = ndim(rng), m = ndim(rng);
      const auto stream = random_stream(rng, p, n, m, len(rng));
      const Vector theta0 = gaussian(rng, p, 1);
      c.measured = std::max(c.measured, rpl_recursive_vs_batch(stream, 1.0, theta0));
    }
    c.passed = c.measured <= c.tolerance;
    checks.push_back(c);
  }
  {
    Check c{"rlsff recursive matches batch", false, 0.0, 1e-9, ""};
    for (std::size_t s = 0; s < streams; ++s) {
      const auto p = pdim(rng), n = ndim(rng), m = ndim(rng);
      const auto stream = random_stream(rng, p, n, m, len(rng));
      const Vector theta0 = gaussian(rng, p, 1);
      c.measured = std::max(c.measured, rlsff_recursive_vs_batch(stream, 1.0, 0.99, theta0));
    }
    c.passed = c.measured <= c.tolerance;
    checks.push_back(c);
  }
  {
    Check c{"excitation scans match brute force", true, 0.0, 0.0, ""};
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < streams; ++s) {
      const auto p = pdim(rng), n = ndim(rng), m = ndim(rng);
      const auto features = random_stream(rng, p, n, m, 1 + len(rng) / 4).features();
      const double delta = window_lambda_min(features, 0, features.size()) * 0.5 + 1e-3;
      if (se_detect(features, delta) != brute_force_se(features, delta)) ++mismatches;
      const std::size_t ts = std::min<std::size_t>(features.size() - 1, p + 2);
      if (pe_check(features, delta, ts).satisfied != brute_force_pe(features, delta, ts))
        ++mismatches;
    }
    c.measured = static_cast<double>(mismatches);
    c.passed = mismatches == 0;
    checks.push_back(c);
  }
  {
    Check c{"scalar-hand matches scripted rollout", false, 0.0, 1e-12, ""};
    const std::size_t horizon = 3;
    ExperimentConfig config = default_config("scalar-hand");
    const auto built = build_scenario(config.scenario, horizon);
    const auto run = run_experiment(*built.model, config.estimator, built.initial_state, horizon,
                                    CostKind::Quadratic);
    const auto script = scalar_hand_script(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
      c.measured = std::max(c.measured, std::abs(run.closed.estimates[k](0) - script.theta[k]));
      c.measured = std::max(c.measured, std::abs(run.closed.states[k + 1](0) - script.x[k + 1]));
      c.measured = std::max(c.measured, std::abs(run.regret.cumulative[k] -
                                                 script.cumulative_regret[k]));
    }
    const auto controller = make_estimator(config.estimator);
    const auto closed = rollout_closed_loop(*built.model, *controller, built.initial_state, horizon);
    c.measured =
        std::max(c.measured, std::abs(closed.final_estimator->estimate()(0) - script.theta[horizon]));
    c.detail = "R_3 = " + std::to_string(run.regret.total());
    c.passed = c.measured <= c.tolerance;
    checks.push_back(c);
  }
  return checks;
}

}  // namespace rpl::oracle
