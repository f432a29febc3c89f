#pragma once

// Excitation of the regression stream F_i = phi_i B_i^T (p x n blocks):
// sufficient excitation (a prefix Gram that becomes uniformly positive
// definite), persistence of excitation (every window does), the accumulated
// Gram bound beta, and the contraction constants derived from them.

#include <cstddef>
#include <optional>
#include <vector>

#include "rpl/dynamics.hpp"
#include "rpl/linalg.hpp"

namespace rpl {

using FeatureStream = std::vector<Matrix>;

/// F_k = (B_k phi_k^T)^T along a rollout.
FeatureStream excitation_stream(const Trajectory& trajectory);

/// lambda_min(sum_{i<=k} F_i F_i^T) for every k.
std::vector<double> prefix_lambda_min(const FeatureStream& stream);

/// Smallest T_s whose prefix Gram (indices 0..T_s) has lambda_min >= delta.
std::optional<std::size_t> se_detect(const FeatureStream& stream, double delta);

struct PeResult {
  bool satisfied = false;
  std::vector<double> window_lambda_min;  // one entry per window start k0
};

/// Every window {k0, ..., k0 + T_s} inside the stream has lambda_min >= delta.
/// The quantifier over k0 only covers the realized horizon. Throws
/// StreamTooShort when the stream has fewer than T_s + 1 blocks.
PeResult pe_check(const FeatureStream& stream, double delta, std::size_t window_ts);

/// Smallest T_s for which pe_check passes, if any does.
std::optional<std::size_t> pe_minimal_window(const FeatureStream& stream, double delta);

struct BetaEstimate {
  double beta = 0.0;            // lambda_max of the total Gram; a lower witness
  double tail_increment = 0.0;  // growth of that value over the last 10% of the stream
};

BetaEstimate beta_estimate(const FeatureStream& stream);

/// ||Phi|| for the stacked regressor through block `last` (inclusive).
double stacked_norm(const FeatureStream& stream, std::size_t last);

struct ContractionConstants {
  double eta = 1.0;
  std::optional<double> gamma;
  std::optional<double> epsilon_max;  // absent: unbounded (beta == delta)
  std::optional<double> c_r;
  std::optional<double> c_p;
};

/// eta = eps / (delta + eps); eps_max = delta sqrt(delta) / (sqrt(beta) - sqrt(delta));
/// gamma = eps sqrt(beta) / (eps sqrt(delta) + delta sqrt(delta)) when eps < eps_max;
/// c_p = the given stacked norm, else sqrt(beta).
ContractionConstants rpl_constants(double delta, double epsilon, double beta,
                                   std::optional<double> phi_ts_norm = std::nullopt);

/// c_r with c_r^2 = eps (lambda^{2 T_s} - lambda^{-2}) / (delta (1 - lambda^{-2})).
double rlsff_constant(double epsilon, double delta, double lambda_squared, std::size_t ts);

struct ExcitationReport {
  std::vector<double> prefix_lambda_min;
  std::optional<std::size_t> detected_ts;
  double delta_used = 0.0;
  std::optional<std::vector<double>> window_lambda_min;
  std::optional<std::size_t> pe_window_ts;
  bool pe_satisfied = false;
  double beta_accumulated = 0.0;
  double beta_tail_increment = 0.0;
};

/// Half of the final prefix lambda_min; zero for rank-deficient streams.
double default_delta(const FeatureStream& stream);

/// With pe_window_ts set, PE is checked for that window; otherwise the
/// smallest passing window is searched for.
ExcitationReport excitation_report(const FeatureStream& stream, double delta,
                                   std::optional<std::size_t> pe_window_ts = std::nullopt);

}  // namespace rpl
