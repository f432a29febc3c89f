#pragma once

// Matched-uncertainty systems
//
//   x_{k+1} = f_k(x_k) + B_k(x_k) (u_k - phi_k(x_k)^T theta*)
//
// with closed-loop and counterfactual benchmark rollouts, and the MRAC
// tracking-error construction.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpl/linalg.hpp"

namespace rpl {

using NominalMap = std::function<Vector(std::size_t k, const Vector& x)>;
using InputMatrixMap = std::function<Matrix(std::size_t k, const Vector& x)>;
using FeatureMap = std::function<Matrix(std::size_t k, const Vector& x)>;  // p x m

class TruthAccess;
class SystemModel;
struct StepResult;
struct Trajectory;

StepResult closed_loop_step(const SystemModel& model, std::size_t k, const Vector& x,
                            const Vector& theta);
Trajectory rollout_benchmark(const SystemModel& model, const Vector& x0, std::size_t horizon);

/// The tuple (f, B, phi, theta*). theta* is private: only the innovation
/// constructor (closed_loop_step), the benchmark rollout and TruthAccess can
/// read it.
class SystemModel {
 public:
  SystemModel(std::size_t state_dim, std::size_t input_dim, std::size_t param_dim,
              NominalMap nominal, InputMatrixMap input_matrix, FeatureMap features,
              Vector true_param);

  std::size_t state_dim() const { return n_; }
  std::size_t input_dim() const { return m_; }
  std::size_t param_dim() const { return p_; }

  /// f_k(x), shape-checked.
  Vector nominal(std::size_t k, const Vector& x) const;
  /// B_k(x), n x m.
  Matrix input_matrix(std::size_t k, const Vector& x) const;
  /// phi_k(x), p x m.
  Matrix features(std::size_t k, const Vector& x) const;
  /// B_k(x) phi_k(x)^T, the n x p regressor block.
  Matrix regressor(std::size_t k, const Vector& x) const;

  const NominalMap& nominal_map() const { return nominal_; }

 private:
  friend class TruthAccess;
  friend StepResult closed_loop_step(const SystemModel&, std::size_t, const Vector&, const Vector&);
  friend Trajectory rollout_benchmark(const SystemModel&, const Vector&, std::size_t);

  std::size_t n_;
  std::size_t m_;
  std::size_t p_;
  NominalMap nominal_;
  InputMatrixMap input_matrix_;
  FeatureMap features_;
  Vector theta_star_;
};

/// Deliberate, greppable escape hatch for analysis code (regret bounds,
/// test fixtures). Controllers never receive one.
class TruthAccess {
 public:
  static const Vector& true_parameter(const SystemModel& model) { return model.theta_star_; }
};

/// Causal estimator seen by the closed loop: it is queried for theta_k, then
/// fed (phi_k, B_k, y_k) once x_{k+1} has been observed.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual Vector estimate() const = 0;
  virtual void observe(const Matrix& phi, const Matrix& b, const Vector& y) = 0;
  virtual std::unique_ptr<Estimator> clone() const = 0;
};

struct StepResult {
  Vector x_next;
  Vector u;
  Vector y;  // innovation
  Matrix features;      // phi_k(x_k), p x m
  Matrix input_matrix;  // B_k(x_k), n x m
};

struct Trajectory {
  std::size_t horizon = 0;
  std::vector<Vector> states;       // x_0 .. x_T
  std::vector<Vector> inputs;       // u_0 .. u_{T-1}
  std::vector<Vector> estimates;    // theta_0 .. theta_{T-1}; empty for the benchmark
  std::vector<Vector> innovations;  // y_0 .. y_{T-1}; empty for the benchmark
  std::vector<Matrix> regressors;   // B_k phi_k^T (n x p) along the run
};

struct ClosedLoopRun {
  Trajectory trajectory;
  std::unique_ptr<Estimator> final_estimator;
};

/// theta_k is read from the estimator before step k; the estimator only ever
/// sees data through y_{k-1} at that point. Errors are rethrown with the
/// offending step index.
ClosedLoopRun rollout_closed_loop(const SystemModel& model, const Estimator& controller,
                                  const Vector& x0, std::size_t horizon);

/// Re-applies the system equation to stored (x_k, u_k) pairs; returns the
/// largest deviation from the stored x_{k+1}.
double replay_deviation(const SystemModel& model, const Trajectory& trajectory);

/// Largest |eigenvalue| of a general square matrix.
double spectral_radius(const Matrix& a);

// ---------------------------------------------------------------------------
// MRAC error system

using ReferenceInput = std::function<Vector(std::size_t k)>;  // r_k, m-vector
using PlantFeatureMap = std::function<Matrix(const Vector& x)>;  // psi(x), p x m

struct MracPlant {
  Matrix a;
  Matrix b;
  Matrix a_ref;
  Matrix b_ref;
  PlantFeatureMap psi;
  std::size_t param_dim = 0;
  Vector theta_star;
  ReferenceInput reference;
  Vector reference_start;  // xbar_0
  /// Feature map is defined through the simulated reference, which is
  /// precomputed this far.
  std::size_t reference_horizon = 0;
  std::optional<Matrix> k1;  // supply both to skip the least-squares solve
  std::optional<Matrix> k2;
};

struct MracErrorSystem {
  SystemModel model;
  Matrix k1;
  Matrix k2;
  double matching_residual = 0.0;
  bool residual_warning = false;  // residual above 1e-8; not fatal
  std::shared_ptr<const std::vector<Vector>> reference_states;  // xbar_0 .. xbar_H
};

inline constexpr double kMatchingResidualTolerance = 1e-8;

struct MatchingGains {
  Matrix k1;
  Matrix k2;
  double residual = 0.0;  // max(||A - B K1 - A_r||, ||B K2 - B_r||)
};

/// Least-squares K1, K2 for A - B K1 = A_r and B K2 = B_r. Throws
/// NotFullColumnRank.
MatchingGains solve_matching(const Matrix& a, const Matrix& b, const Matrix& a_ref,
                             const Matrix& b_ref);

/// Error dynamics e_{k+1} = A_r e_k + B phi_k(e_k)^T (theta_k - theta*),
/// phi_k(e) = psi(e + xbar_k). Throws NotFullColumnRank or UnstableReference.
MracErrorSystem build_mrac_error_system(const MracPlant& plant);

// ---------------------------------------------------------------------------
// Exponential incremental ISS

struct EdissCertificate {
  double c0 = 1.0;
  double cw = 1.0;
  double rho = 0.5;
  std::size_t fit_horizon = 0;
};

struct EdissReport {
  bool pass = true;
  double worst_margin = 0.0;  // min over trials and steps of (bound - ||x_k - y_k||)
  std::size_t trials = 0;
  std::optional<std::size_t> first_violation_step;
};

/// Monte-Carlo check of the incremental ISS inequality for x_{k+1} = f_k(x_k)
/// against y_{k+1} = f_k(y_k) + w_k with ||w_k|| <= perturbation_scale.
/// Trial 0 is always undisturbed.
EdissReport verify_ediss(const NominalMap& nominal, std::size_t state_dim,
                         const EdissCertificate& certificate, std::size_t trials,
                         double perturbation_scale, std::size_t horizon, std::uint64_t seed = 0);

inline constexpr double kDefaultRhoMargin = 0.5;

/// Certificate for x_{k+1} = A_r x_k: rho = sr + margin (1 - sr),
/// c0 = cw = max_{k <= K} ||A_r^k|| / rho^k.
EdissCertificate fit_ediss_linear(const Matrix& a_ref, double rho_margin = kDefaultRhoMargin,
                                  std::size_t fit_horizon = 1000);

}  // namespace rpl
