#pragma once

// Independent reference computations. Nothing here calls the code path it is
// used to check: excitation scans use Eigen's self-adjoint solver on freshly
// summed Grams, and the scalar fixture is a closed-form script.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rpl/estimators.hpp"
#include "rpl/excitation.hpp"

namespace rpl::oracle {

/// Noiseless regression data y_i = B_i phi_i^T theta*.
struct RandomStream {
  std::vector<Matrix> phi;  // p x m
  std::vector<Matrix> b;    // n x m
  std::vector<Vector> y;    // n
  Vector theta_star;

  std::size_t size() const { return phi.size(); }
  FeatureStream features() const;  // F_i = phi_i B_i^T
  RegressionHistory<double> history() const;
};

/// Gaussian phi, B and theta*.
RandomStream random_stream(std::mt19937_64& rng, std::size_t p, std::size_t n, std::size_t m,
                           std::size_t horizon);

/// phi_i cycles through `period` fixed random blocks, so every window of
/// `period` consecutive steps has the same Gram.
RandomStream periodic_stream(std::mt19937_64& rng, std::size_t p, std::size_t n, std::size_t m,
                             std::size_t period, std::size_t horizon);

/// Smallest eigenvalue of sum_{i in [begin, end)} F_i F_i^T.
double window_lambda_min(const FeatureStream& stream, std::size_t begin, std::size_t end);

std::optional<std::size_t> brute_force_se(const FeatureStream& stream, double delta);
bool brute_force_pe(const FeatureStream& stream, double delta, std::size_t window_ts);

/// The scalar fixture x_{k+1} = x_k / 2 + (theta_k - 1), x_0 = 1, theta_0 = 0,
/// eps = 1, with theta_{k+1} the closed-form proximal minimizer
/// (sum_{i<=k} y_i + eps theta_k) / (k + 1 + eps).
struct ScalarScript {
  std::vector<double> theta;  // theta_0 .. theta_T
  std::vector<double> x;      // x_0 .. x_T
  std::vector<double> x_star;
  std::vector<double> cumulative_regret;  // R_1 .. R_T
};

ScalarScript scalar_hand_script(std::size_t horizon);

struct Check {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// max over steps of ||theta_rec - theta_batch|| / ||theta_batch||
double rpl_recursive_vs_batch(const RandomStream& stream, double epsilon, const Vector& theta0);
double rlsff_recursive_vs_batch(const RandomStream& stream, double epsilon, double lambda_squared,
                                const Vector& theta0);

/// The checks behind `oracle-check`.
std::vector<Check> run_all(std::uint64_t seed, std::size_t streams = 200);

}  // namespace rpl::oracle
