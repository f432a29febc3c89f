#pragma once

// Recursive proximal learning (RPL) and recursive least squares with
// exponential forgetting (RLSFF), plus the batch costs they minimize.
//
// Both estimators consume one regression block per step: the features
// phi_k (p x m), the input matrix B_k (n x m) and the innovation y_k (n).
// The block F_k = phi_k B_k^T (p x n) is what enters every Gram matrix.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rpl/dynamics.hpp"
#include "rpl/linalg.hpp"

namespace rpl {

namespace detail {

template <typename Scalar>
void check_block(std::size_t p, const MatrixX<Scalar>& phi, const MatrixX<Scalar>& b,
                 const VectorX<Scalar>& y) {
  if (static_cast<std::size_t>(phi.rows()) != p || phi.cols() != b.cols() || b.rows() != y.size())
    throw Error(Errc::DimensionMismatch,
                "regression block shapes: phi " + std::to_string(phi.rows()) + "x" +
                    std::to_string(phi.cols()) + ", B " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + ", y " + std::to_string(y.size()) +
                    " (parameter dimension " + std::to_string(p) + ")");
}

template <typename Scalar>
void check_epsilon(Scalar epsilon) {
  if (!(epsilon > Scalar(0)) || !std::isfinite(static_cast<double>(epsilon)))
    throw Error(Errc::ValidationError, "epsilon must be positive and finite");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RPL

template <typename Scalar>
struct RplState {
  Scalar epsilon{1};
  VectorX<Scalar> theta;  // theta_k
  MatrixX<Scalar> pinv;   // P_k^{-1} = H_k + epsilon I
  MatrixX<Scalar> h;      // H_k
  VectorX<Scalar> s;      // s_k
  VectorX<Scalar> grad;   // H_k theta_k - s_k, carried as eps (theta_{k-1} - theta_k)
  std::size_t k = 0;

  std::size_t dim() const { return static_cast<std::size_t>(theta.size()); }
};

template <typename Scalar>
RplState<Scalar> make_rpl_state(Scalar epsilon, const VectorX<Scalar>& theta0) {
  detail::check_epsilon(epsilon);
  require_finite(theta0, "initial estimate");
  const Eigen::Index p = theta0.size();
  return RplState<Scalar>{epsilon, theta0, epsilon * MatrixX<Scalar>::Identity(p, p),
                          MatrixX<Scalar>::Zero(p, p), VectorX<Scalar>::Zero(p),
                          VectorX<Scalar>::Zero(p), 0};
}

/// One recursive proximal step. The accumulators absorb block k, then theta
/// moves by a solve against P_{k+1}^{-1}; no inverse is ever formed.
/// H_{k+1} theta_k - s_{k+1} is evaluated as grad_k + F (B phi^T theta_k - y),
/// which vanishes exactly when theta_k reproduces the data.
template <typename Scalar>
RplState<Scalar> rpl_step(RplState<Scalar> state, const MatrixX<Scalar>& phi,
                          const MatrixX<Scalar>& b, const VectorX<Scalar>& y) {
  detail::check_block(state.dim(), phi, b, y);
  const MatrixX<Scalar> f = phi * b.transpose();
  const MatrixX<Scalar> regressor = b * phi.transpose();
  state.pinv = gram_accumulate(state.pinv, f);
  state.h = gram_accumulate(state.h, f);
  state.s += f * y;
  const VectorX<Scalar> residual = regressor * state.theta - y;
  const VectorX<Scalar> gradient = state.grad + f * residual;
  const VectorX<Scalar> move = spd_solve(state.pinv, gradient);
  state.theta -= move;
  state.grad = state.epsilon * move;
  ++state.k;
  return state;
}

// ---------------------------------------------------------------------------
// RLSFF

inline constexpr double kMinLambdaSquared = 0.5;

template <typename Scalar>
struct RlsffState {
  Scalar epsilon{1};
  Scalar lambda_squared{0.99};
  VectorX<Scalar> theta;
  MatrixX<Scalar> pinv;
  std::size_t k = 0;

  std::size_t dim() const { return static_cast<std::size_t>(theta.size()); }
};

/// lambda^2 at or below 0.5 is refused unless allow_low_forgetting is set;
/// small forgetting factors make P^{-1} ill-conditioned quickly.
template <typename Scalar>
RlsffState<Scalar> make_rlsff_state(Scalar epsilon, Scalar lambda_squared,
                                    const VectorX<Scalar>& theta0,
                                    bool allow_low_forgetting = false) {
  detail::check_epsilon(epsilon);
  require_finite(theta0, "initial estimate");
  if (!(lambda_squared > Scalar(0) && lambda_squared < Scalar(1)))
    throw Error(Errc::ValidationError, "lambda_squared must lie in (0, 1)");
  if (!allow_low_forgetting && lambda_squared <= Scalar(kMinLambdaSquared))
    throw Error(Errc::ValidationError,
                "lambda_squared must exceed 0.5 unless allow_low_forgetting is set");
  const Eigen::Index p = theta0.size();
  return RlsffState<Scalar>{epsilon, lambda_squared, theta0,
                            epsilon * MatrixX<Scalar>::Identity(p, p), 0};
}

template <typename Scalar>
RlsffState<Scalar> rlsff_step(RlsffState<Scalar> state, const MatrixX<Scalar>& phi,
                              const MatrixX<Scalar>& b, const VectorX<Scalar>& y) {
  detail::check_block(state.dim(), phi, b, y);
  const MatrixX<Scalar> f = phi * b.transpose();
  state.pinv = gram_accumulate(MatrixX<Scalar>(state.lambda_squared * state.pinv), f);
  const MatrixX<Scalar> regressor = b * phi.transpose();
  const VectorX<Scalar> residual = regressor * state.theta - y;
  state.theta -= spd_solve(state.pinv, VectorX<Scalar>(f * residual));
  ++state.k;
  return state;
}

// ---------------------------------------------------------------------------
// Stored regression data

/// Ordered (F_i, y_i) pairs with F_i = phi_i B_i^T. The stacked regressor
/// has the n x p blocks B_i phi_i^T = F_i^T as its block rows.
template <typename Scalar>
class RegressionHistory {
 public:
  explicit RegressionHistory(std::size_t param_dim) : p_(param_dim) {}

  void push(const MatrixX<Scalar>& phi, const MatrixX<Scalar>& b, const VectorX<Scalar>& y) {
    detail::check_block(p_, phi, b, y);
    push_block(MatrixX<Scalar>(phi * b.transpose()), y);
  }

  void push_block(MatrixX<Scalar> f, VectorX<Scalar> y) {
    if (static_cast<std::size_t>(f.rows()) != p_ || f.cols() != y.size())
      throw Error(Errc::DimensionMismatch, "regression block has wrong shape");
    if (!blocks_.empty() && f.cols() != blocks_.front().cols())
      throw Error(Errc::DimensionMismatch, "regression blocks must share the output dimension");
    blocks_.push_back(std::move(f));
    ys_.push_back(std::move(y));
  }

  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  std::size_t param_dim() const { return p_; }
  std::size_t output_dim() const { return blocks_.empty() ? 0 : blocks_.front().cols(); }
  const MatrixX<Scalar>& block(std::size_t i) const { return blocks_[i]; }
  const VectorX<Scalar>& output(std::size_t i) const { return ys_[i]; }

  /// The first `count` blocks as a history of their own.
  RegressionHistory prefix(std::size_t count) const {
    RegressionHistory out(p_);
    for (std::size_t i = 0; i < count && i < size(); ++i) out.push_block(blocks_[i], ys_[i]);
    return out;
  }

  /// (k n) x p
  MatrixX<Scalar> stacked_phi() const {
    const Eigen::Index n = static_cast<Eigen::Index>(output_dim());
    MatrixX<Scalar> out(static_cast<Eigen::Index>(size()) * n, static_cast<Eigen::Index>(p_));
    for (std::size_t i = 0; i < size(); ++i)
      out.middleRows(static_cast<Eigen::Index>(i) * n, n) = blocks_[i].transpose();
    return out;
  }

  /// (k n)
  VectorX<Scalar> stacked_y() const {
    const Eigen::Index n = static_cast<Eigen::Index>(output_dim());
    VectorX<Scalar> out(static_cast<Eigen::Index>(size()) * n);
    for (std::size_t i = 0; i < size(); ++i)
      out.segment(static_cast<Eigen::Index>(i) * n, n) = ys_[i];
    return out;
  }

 private:
  std::size_t p_;
  std::vector<MatrixX<Scalar>> blocks_;
  std::vector<VectorX<Scalar>> ys_;
};

// ---------------------------------------------------------------------------
// Batch costs and their minimizers

/// argmin_theta h(theta) + (eps/2) ||theta - theta_prev||^2, from the
/// stacked normal equations (Phi^T Phi + eps I) theta = Phi^T Y + eps theta_prev.
template <typename Scalar>
VectorX<Scalar> rpl_batch_oracle(const RegressionHistory<Scalar>& history,
                                 const VectorX<Scalar>& theta_prev, Scalar epsilon) {
  detail::check_epsilon(epsilon);
  const Eigen::Index p = static_cast<Eigen::Index>(history.param_dim());
  if (theta_prev.size() != p) throw Error(Errc::DimensionMismatch, "theta_prev has wrong size");
  if (history.empty()) return theta_prev;
  const MatrixX<Scalar> phi = history.stacked_phi();
  const MatrixX<Scalar> normal =
      symmetrized(MatrixX<Scalar>(phi.transpose() * phi)) + epsilon * MatrixX<Scalar>::Identity(p, p);
  const VectorX<Scalar> rhs = phi.transpose() * history.stacked_y() + epsilon * theta_prev;
  return spd_solve(normal, rhs);
}

/// Minimizer of the discounted cost g^f_{k-1} with k = history.size(), from
/// the weighted normal equations.
template <typename Scalar>
VectorX<Scalar> rlsff_batch_oracle(const RegressionHistory<Scalar>& history,
                                   const VectorX<Scalar>& theta0, Scalar epsilon,
                                   Scalar lambda_squared) {
  detail::check_epsilon(epsilon);
  const Eigen::Index p = static_cast<Eigen::Index>(history.param_dim());
  if (theta0.size() != p) throw Error(Errc::DimensionMismatch, "theta0 has wrong size");
  const std::size_t k = history.size();
  const Scalar prior = std::pow(lambda_squared, static_cast<Scalar>(k)) * epsilon;
  MatrixX<Scalar> normal = prior * MatrixX<Scalar>::Identity(p, p);
  VectorX<Scalar> rhs = prior * theta0;
  if (k > 0) {
    const Eigen::Index n = static_cast<Eigen::Index>(history.output_dim());
    const MatrixX<Scalar> phi = history.stacked_phi();
    const VectorX<Scalar> y = history.stacked_y();
    VectorX<Scalar> weights(phi.rows());
    for (std::size_t i = 0; i < k; ++i)
      weights.segment(static_cast<Eigen::Index>(i) * n, n)
          .setConstant(std::pow(lambda_squared, static_cast<Scalar>(k - 1 - i)));
    normal += symmetrized(MatrixX<Scalar>(phi.transpose() * weights.asDiagonal() * phi));
    rhs += phi.transpose() * weights.asDiagonal() * y;
  }
  return spd_solve(normal, rhs);
}

/// (1/2) ||Phi theta - Y||^2. When theta_star is given, also checks the
/// equivalent form (1/2) sum ||B_i phi_i^T (theta - theta*)||^2 and throws
/// InconsistentData if the stored innovations do not match it.
template <typename Scalar>
Scalar online_cost_h(const RegressionHistory<Scalar>& history, const VectorX<Scalar>& theta,
                     const std::optional<VectorX<Scalar>>& theta_star = std::nullopt) {
  if (theta.size() != static_cast<Eigen::Index>(history.param_dim()))
    throw Error(Errc::DimensionMismatch, "theta has wrong size");
  Scalar cost = 0;
  Scalar matched = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const MatrixX<Scalar>& f = history.block(i);
    cost += (f.transpose() * theta - history.output(i)).squaredNorm();
    if (theta_star) matched += (f.transpose() * (theta - *theta_star)).squaredNorm();
  }
  cost /= Scalar(2);
  if (theta_star) {
    matched /= Scalar(2);
    if (std::abs(cost - matched) > Scalar(1e-10) * (Scalar(1) + std::abs(matched)))
      throw Error(Errc::InconsistentData, "stored innovations are not consistent with theta*");
  }
  return cost;
}

template <typename Scalar>
Scalar online_cost_g(const RegressionHistory<Scalar>& history, const VectorX<Scalar>& theta,
                     const VectorX<Scalar>& theta_prev, Scalar epsilon) {
  return online_cost_h(history, theta) + epsilon / Scalar(2) * (theta - theta_prev).squaredNorm();
}

/// (1/2) sum lambda^{2(k-1-i)} ||B_i phi_i^T theta - y_i||^2
///   + (lambda^{2k} eps / 2) ||theta - theta0||^2,  k = history.size().
template <typename Scalar>
Scalar online_cost_gf(const RegressionHistory<Scalar>& history, const VectorX<Scalar>& theta,
                      const VectorX<Scalar>& theta0, Scalar epsilon, Scalar lambda_squared) {
  if (theta.size() != static_cast<Eigen::Index>(history.param_dim()) || theta0.size() != theta.size())
    throw Error(Errc::DimensionMismatch, "theta has wrong size");
  const std::size_t k = history.size();
  Scalar cost = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const Scalar w = std::pow(lambda_squared, static_cast<Scalar>(k - 1 - i));
    cost += w * (history.block(i).transpose() * theta - history.output(i)).squaredNorm();
  }
  cost /= Scalar(2);
  return cost + std::pow(lambda_squared, static_cast<Scalar>(k)) * epsilon / Scalar(2) *
                    (theta - theta0).squaredNorm();
}

// ---------------------------------------------------------------------------
// Closed-loop handles

class RplEstimator final : public Estimator {
 public:
  RplEstimator(double epsilon, const Vector& theta0) : state_(make_rpl_state(epsilon, theta0)) {}
  explicit RplEstimator(RplState<double> state) : state_(std::move(state)) {}

  Vector estimate() const override { return state_.theta; }
  void observe(const Matrix& phi, const Matrix& b, const Vector& y) override {
    state_ = rpl_step(std::move(state_), phi, b, y);
  }
  std::unique_ptr<Estimator> clone() const override { return std::make_unique<RplEstimator>(*this); }

  const RplState<double>& state() const { return state_; }

 private:
  RplState<double> state_;
};

class RlsffEstimator final : public Estimator {
 public:
  RlsffEstimator(double epsilon, double lambda_squared, const Vector& theta0,
                 bool allow_low_forgetting = false)
      : state_(make_rlsff_state(epsilon, lambda_squared, theta0, allow_low_forgetting)) {}
  explicit RlsffEstimator(RlsffState<double> state) : state_(std::move(state)) {}

  Vector estimate() const override { return state_.theta; }
  void observe(const Matrix& phi, const Matrix& b, const Vector& y) override {
    state_ = rlsff_step(std::move(state_), phi, b, y);
  }
  std::unique_ptr<Estimator> clone() const override {
    return std::make_unique<RlsffEstimator>(*this);
  }

  const RlsffState<double>& state() const { return state_; }

 private:
  RlsffState<double> state_;
};

}  // namespace rpl
