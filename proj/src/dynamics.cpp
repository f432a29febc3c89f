#include "rpl/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace rpl {

namespace {

std::string shape(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void check_vector(const Vector& v, std::size_t dim, const std::string& what) {
  if (static_cast<std::size_t>(v.size()) != dim)
    throw Error(Errc::DimensionMismatch, what + " has dimension " + std::to_string(v.size()) +
                                             ", expected " + std::to_string(dim));
}

Error at_step(const Error& e, std::size_t k) {
  return Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
}

}  // namespace

SystemModel::SystemModel(std::size_t state_dim, std::size_t input_dim, std::size_t param_dim,
                         NominalMap nominal, InputMatrixMap input_matrix, FeatureMap features,
                         Vector true_param)
    : n_(state_dim),
      m_(input_dim),
      p_(param_dim),
      nominal_(std::move(nominal)),
      input_matrix_(std::move(input_matrix)),
      features_(std::move(features)),
      theta_star_(std::move(true_param)) {
  if (n_ == 0 || m_ == 0 || p_ == 0)
    throw Error(Errc::DimensionMismatch, "system dimensions must be positive");
  if (!nominal_ || !input_matrix_ || !features_)
    throw Error(Errc::ValidationError, "system maps must all be set");
  check_vector(theta_star_, p_, "true parameter");
  require_finite(theta_star_, "true parameter");
}

Vector SystemModel::nominal(std::size_t k, const Vector& x) const {
  Vector fx = nominal_(k, x);
  check_vector(fx, n_, "nominal map output");
  return fx;
}

Matrix SystemModel::input_matrix(std::size_t k, const Vector& x) const {
  Matrix b = input_matrix_(k, x);
  if (static_cast<std::size_t>(b.rows()) != n_ || static_cast<std::size_t>(b.cols()) != m_)
    throw Error(Errc::DimensionMismatch, "input matrix is " + shape(b) + ", expected " +
                                             std::to_string(n_) + "x" + std::to_string(m_));
  return b;
}

Matrix SystemModel::features(std::size_t k, const Vector& x) const {
  Matrix phi = features_(k, x);
  if (static_cast<std::size_t>(phi.rows()) != p_ || static_cast<std::size_t>(phi.cols()) != m_)
    throw Error(Errc::DimensionMismatch, "feature matrix is " + shape(phi) + ", expected " +
                                             std::to_string(p_) + "x" + std::to_string(m_));
  return phi;
}

Matrix SystemModel::regressor(std::size_t k, const Vector& x) const {
  return input_matrix(k, x) * features(k, x).transpose();
}

StepResult closed_loop_step(const SystemModel& model, std::size_t k, const Vector& x,
                            const Vector& theta) {
  check_vector(x, model.n_, "state");
  check_vector(theta, model.p_, "estimate");
  require_finite(theta, "estimate");

  const Vector fx = model.nominal(k, x);
  const Matrix b = model.input_matrix(k, x);
  const Matrix phi = model.features(k, x);
  const Matrix regressor = b * phi.transpose();

  StepResult out;
  out.u = phi.transpose() * theta;
  out.x_next = fx + regressor * (theta - model.theta_star_);
  if (!out.x_next.allFinite()) throw Error(Errc::NonFiniteState, "next state is not finite");

  const Vector predicted = regressor * theta;
  out.y = -out.x_next + fx + predicted;
  const Vector matched = regressor * model.theta_star_;
  const double tol =
      1e-12 * (1.0 + fx.norm() + out.x_next.norm() + predicted.norm() + matched.norm());
  if ((out.y - matched).norm() > tol)
    throw Error(Errc::InconsistentData, "innovation deviates from the matched input");
  out.features = phi;
  out.input_matrix = b;
  return out;
}

ClosedLoopRun rollout_closed_loop(const SystemModel& model, const Estimator& controller,
                                  const Vector& x0, std::size_t horizon) {
  check_vector(x0, model.state_dim(), "initial state");
  ClosedLoopRun run;
  run.final_estimator = controller.clone();
  Estimator& estimator = *run.final_estimator;

  Trajectory& traj = run.trajectory;
  traj.horizon = horizon;
  traj.states.reserve(horizon + 1);
  traj.inputs.reserve(horizon);
  traj.estimates.reserve(horizon);
  traj.innovations.reserve(horizon);
  traj.regressors.reserve(horizon);
  traj.states.push_back(x0);

  for (std::size_t k = 0; k < horizon; ++k) {
    try {
      Vector theta = estimator.estimate();
      StepResult step = closed_loop_step(model, k, traj.states.back(), theta);
      estimator.observe(step.features, step.input_matrix, step.y);
      traj.regressors.push_back(step.input_matrix * step.features.transpose());
      traj.estimates.push_back(std::move(theta));
      traj.inputs.push_back(std::move(step.u));
      traj.innovations.push_back(std::move(step.y));
      traj.states.push_back(std::move(step.x_next));
    } catch (const Error& e) {
      throw at_step(e, k);
    }
  }
  return run;
}

Trajectory rollout_benchmark(const SystemModel& model, const Vector& x0, std::size_t horizon) {
  check_vector(x0, model.n_, "initial state");
  Trajectory traj;
  traj.horizon = horizon;
  traj.states.reserve(horizon + 1);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < horizon; ++k) {
    try {
      const Vector& x = traj.states.back();
      const Matrix phi = model.features(k, x);
      traj.inputs.push_back(phi.transpose() * model.theta_star_);
      traj.regressors.push_back(model.input_matrix(k, x) * phi.transpose());
      Vector next = model.nominal(k, x);
      if (!next.allFinite()) throw Error(Errc::NonFiniteState, "benchmark state is not finite");
      traj.states.push_back(std::move(next));
    } catch (const Error& e) {
      throw at_step(e, k);
    }
  }
  return traj;
}

double replay_deviation(const SystemModel& model, const Trajectory& trajectory) {
  const Vector& theta_star = TruthAccess::true_parameter(model);
  double worst = 0.0;
  for (std::size_t k = 0; k < trajectory.inputs.size(); ++k) {
    const Vector& x = trajectory.states[k];
    const Vector alpha = model.features(k, x).transpose() * theta_star;
    const Vector next = model.nominal(k, x) + model.input_matrix(k, x) * (trajectory.inputs[k] - alpha);
    worst = std::max(worst, (next - trajectory.states[k + 1]).norm());
  }
  return worst;
}

double spectral_radius(const Matrix& a) {
  require_square(a, "spectral_radius matrix");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------

namespace {

// Least-squares X in B X = rhs via the normal equations, column by column.
Matrix least_squares(const Matrix& b, const Matrix& rhs) {
  const Matrix normal = b.transpose() * b;
  const Matrix brhs = b.transpose() * rhs;
  Matrix x(b.cols(), rhs.cols());
  for (Eigen::Index j = 0; j < rhs.cols(); ++j) x.col(j) = spd_solve(normal, Vector(brhs.col(j)));
  return x;
}

}  // namespace

MatchingGains solve_matching(const Matrix& a, const Matrix& b, const Matrix& a_ref,
                             const Matrix& b_ref) {
  if (a.rows() != a.cols() || a_ref.rows() != a.rows() || a_ref.cols() != a.cols() ||
      b.rows() != a.rows() || b_ref.rows() != b.rows() || b_ref.cols() != b.cols())
    throw Error(Errc::DimensionMismatch, "MRAC plant matrices have inconsistent shapes");
  const Matrix btb = b.transpose() * b;
  const auto extrema = sym_eig_extrema(btb);
  if (!(extrema.min > 1e-12 * std::max(extrema.max, 1e-300)))
    throw Error(Errc::NotFullColumnRank, "B is not full column rank");
  MatchingGains out;
  out.k1 = least_squares(b, a - a_ref);
  out.k2 = least_squares(b, b_ref);
  out.residual = std::max(spectral_norm(Matrix(a - b * out.k1 - a_ref)),
                          spectral_norm(Matrix(b * out.k2 - b_ref)));
  return out;
}

MracErrorSystem build_mrac_error_system(const MracPlant& plant) {
  const Eigen::Index n = plant.a.rows();
  require_square(plant.a, "A");
  require_square(plant.a_ref, "A_r");
  if (plant.a_ref.rows() != n || plant.b.rows() != n || plant.b_ref.rows() != n ||
      plant.b_ref.cols() != plant.b.cols())
    throw Error(Errc::DimensionMismatch, "MRAC plant matrices have inconsistent shapes");
  if (!plant.psi || !plant.reference)
    throw Error(Errc::ValidationError, "MRAC plant needs a feature map and a reference input");
  if (plant.reference_start.size() != n)
    throw Error(Errc::DimensionMismatch, "reference start has wrong dimension");

  const double sr = spectral_radius(plant.a_ref);
  if (!(sr < 1.0))
    throw Error(Errc::UnstableReference,
                "reference dynamics have spectral radius " + std::to_string(sr));

  MatchingGains gains = solve_matching(plant.a, plant.b, plant.a_ref, plant.b_ref);
  if (plant.k1) gains.k1 = *plant.k1;
  if (plant.k2) gains.k2 = *plant.k2;
  Matrix& k1 = gains.k1;
  Matrix& k2 = gains.k2;
  if (k1.rows() != plant.b.cols() || k1.cols() != n || k2.rows() != plant.b.cols() ||
      k2.cols() != plant.b.cols())
    throw Error(Errc::DimensionMismatch, "supplied K1/K2 have wrong shapes");
  const double residual = std::max(spectral_norm(Matrix(plant.a - plant.b * k1 - plant.a_ref)),
                                   spectral_norm(Matrix(plant.b * k2 - plant.b_ref)));

  auto reference = std::make_shared<std::vector<Vector>>();
  reference->reserve(plant.reference_horizon + 1);
  reference->push_back(plant.reference_start);
  for (std::size_t k = 0; k < plant.reference_horizon; ++k) {
    const Vector r = plant.reference(k);
    if (r.size() != plant.b_ref.cols())
      throw Error(Errc::DimensionMismatch, "reference input has wrong dimension");
    reference->push_back(plant.a_ref * reference->back() + plant.b_ref * r);
  }
  std::shared_ptr<const std::vector<Vector>> ref_states = reference;

  const Matrix a_ref = plant.a_ref;
  const Matrix b = plant.b;
  const PlantFeatureMap psi = plant.psi;
  SystemModel model(
      static_cast<std::size_t>(n), static_cast<std::size_t>(b.cols()), plant.param_dim,
      [a_ref](std::size_t, const Vector& e) -> Vector { return a_ref * e; },
      [b](std::size_t, const Vector&) -> Matrix { return b; },
      [psi, ref_states](std::size_t k, const Vector& e) -> Matrix {
        if (k >= ref_states->size())
          throw Error(Errc::DimensionMismatch,
                      "reference trajectory only precomputed through step " +
                          std::to_string(ref_states->size() - 1));
        return psi(e + (*ref_states)[k]);
      },
      plant.theta_star);

  return MracErrorSystem{std::move(model), std::move(k1), std::move(k2), residual,
                         residual > kMatchingResidualTolerance, ref_states};
}

// ---------------------------------------------------------------------------

EdissReport verify_ediss(const NominalMap& nominal, std::size_t state_dim,
                         const EdissCertificate& certificate, std::size_t trials,
                         double perturbation_scale, std::size_t horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> magnitude(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(state_dim);

  auto random_vector = [&] {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = unit(rng);
    return v;
  };

  EdissReport report;
  report.trials = trials;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Vector x = random_vector();
    Vector y = random_vector();
    const double d0 = (x - y).norm();
    double disturbance_sum = 0.0;  // sum_i rho^{k-i-1} ||w_i||
    double rho_k = 1.0;
    for (std::size_t k = 0;; ++k) {
      const double bound = certificate.c0 * rho_k * d0 + certificate.cw * disturbance_sum;
      const double gap = (x - y).norm();
      const double margin = bound - gap;
      report.worst_margin = std::min(report.worst_margin, margin);
      if (margin < -1e-12 * (1.0 + bound)) {
        report.pass = false;
        if (!report.first_violation_step) report.first_violation_step = k;
      }
      if (k == horizon) break;

      Vector w = Vector::Zero(n);
      if (trial > 0 && perturbation_scale > 0.0) {
        w = random_vector();
        const double norm = w.norm();
        if (norm > 0.0) w *= perturbation_scale * magnitude(rng) / norm;
      }
      x = nominal(k, x);
      y = nominal(k, y) + w;
      disturbance_sum = certificate.rho * disturbance_sum + w.norm();
      rho_k *= certificate.rho;
    }
  }
  if (trials == 0) report.worst_margin = 0.0;
  return report;
}

EdissCertificate fit_ediss_linear(const Matrix& a_ref, double rho_margin,
                                  std::size_t fit_horizon) {
  require_square(a_ref, "A_r");
  if (!(rho_margin > 0.0 && rho_margin <= 1.0))
    throw Error(Errc::ValidationError, "rho margin must lie in (0, 1]");
  const double sr = spectral_radius(a_ref);
  if (!(sr < 1.0))
    throw Error(Errc::UnstableReference,
                "reference dynamics have spectral radius " + std::to_string(sr));

  EdissCertificate cert;
  cert.rho = sr + rho_margin * (1.0 - sr);
  cert.fit_horizon = fit_horizon;
  // scaled = A_r^k / rho^k
  Matrix scaled = Matrix::Identity(a_ref.rows(), a_ref.cols());
  double c0 = 1.0;
  for (std::size_t k = 1; k <= fit_horizon; ++k) {
    scaled = (scaled * a_ref) / cert.rho;
    c0 = std::max(c0, spectral_norm(scaled));
  }
  cert.c0 = c0;
  cert.cw = c0;
  return cert;
}

}  // namespace rpl
