#pragma once

// Small dense linear algebra on top of Eigen storage types. All problems here
// are a handful of rows wide, so everything is a direct dense method.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rpl/error.hpp"

namespace rpl {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const std::string& what) {
  if (!a.allFinite()) throw Error(Errc::NonFiniteState, what + " has non-finite entries");
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const std::string& what) {
  if (a.rows() != a.cols())
    throw Error(Errc::DimensionMismatch, what + " must be square, got " + std::to_string(a.rows()) +
                                             "x" + std::to_string(a.cols()));
}

/// Relative symmetry test: max|A - A^T| <= tol * max(1, max|A|).
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  using Scalar = typename Derived::Scalar;
  const Scalar scale = std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& a, const std::string& what) {
  require_square(a, what);
  if (!is_symmetric(a)) throw Error(Errc::DimensionMismatch, what + " is not symmetric");
}

/// (G + G^T) / 2
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& g) {
  return (g + g.transpose()) / typename Derived::Scalar(2);
}

/// Solves A x = b for symmetric positive-definite A with a Cholesky
/// factorization. A pivot at or below 1e-14 * trace(A) is reported as
/// NotPositiveDefinite.
template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar> spd_solve(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  require_square(a, "spd_solve matrix");
  if (b.cols() != 1 || b.rows() != a.rows())
    throw Error(Errc::DimensionMismatch, "spd_solve: right-hand side has " +
                                             std::to_string(b.rows()) + " rows, matrix has " +
                                             std::to_string(a.rows()));
  if (!is_symmetric(a)) throw Error(Errc::DimensionMismatch, "spd_solve: matrix is not symmetric");

  const Eigen::Index n = a.rows();
  const Scalar threshold = Scalar(1e-14) * a.trace();
  MatrixX<Scalar> l = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > threshold) || !(pivot > Scalar(0)))
      throw Error(Errc::NotPositiveDefinite,
                  "spd_solve: pivot " + std::to_string(static_cast<double>(pivot)) + " at column " +
                      std::to_string(j));
    const Scalar diag = std::sqrt(pivot);
    l(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Scalar v = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / diag;
    }
  }

  // L z = b, then L^T x = z.
  VectorX<Scalar> z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar v = b(i);
    for (Eigen::Index k = 0; k < i; ++k) v -= l(i, k) * z(k);
    z(i) = v / l(i, i);
  }
  VectorX<Scalar> x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    Scalar v = z(i);
    for (Eigen::Index k = i + 1; k < n; ++k) v -= l(k, i) * x(k);
    x(i) = v / l(i, i);
  }
  return x;
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.
template <typename Derived>
VectorX<typename Derived::Scalar> sym_eigenvalues(const Eigen::MatrixBase<Derived>& a_in) {
  using Scalar = typename Derived::Scalar;
  require_square(a_in, "sym_eigenvalues matrix");
  require_symmetric(a_in, "sym_eigenvalues matrix");
  const Eigen::Index n = a_in.rows();
  MatrixX<Scalar> a = symmetrized(a_in);

  const Scalar total = a.norm();
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Scalar off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == Scalar(0) || std::sqrt(off) <= std::numeric_limits<Scalar>::epsilon() * total) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3) *
                                 (std::abs(a(p, p)) + std::abs(a(q, q)))) {
          a(p, q) = a(q, p) = Scalar(0);
          continue;
        }
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  VectorX<Scalar> eig = a.diagonal();
  std::sort(eig.data(), eig.data() + eig.size());
  return eig;
}

template <typename Scalar>
struct EigExtrema {
  Scalar min;
  Scalar max;
};

template <typename Derived>
EigExtrema<typename Derived::Scalar> sym_eig_extrema(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "sym_eig_extrema matrix");
  if (a.rows() == 0) throw Error(Errc::DimensionMismatch, "sym_eig_extrema: empty matrix");
  const auto eig = sym_eigenvalues(a);
  return {eig(0), eig(eig.size() - 1)};
}

/// Largest singular value, sqrt(lambda_max(A^T A)); works for rectangular A.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  const MatrixX<Scalar> gram =
      a.cols() <= a.rows() ? MatrixX<Scalar>(a.transpose() * a) : MatrixX<Scalar>(a * a.transpose());
  return std::sqrt(std::max(Scalar(0), sym_eig_extrema(gram).max));
}

/// G + F F^T, symmetrized. F is p x n for a p x p accumulator.
template <typename DerivedG, typename DerivedF>
MatrixX<typename DerivedG::Scalar> gram_accumulate(const Eigen::MatrixBase<DerivedG>& g,
                                                   const Eigen::MatrixBase<DerivedF>& f) {
  require_square(g, "gram_accumulate accumulator");
  if (f.rows() != g.rows())
    throw Error(Errc::DimensionMismatch, "gram_accumulate: factor has " + std::to_string(f.rows()) +
                                             " rows, accumulator is " + std::to_string(g.rows()));
  return symmetrized(g + f * f.transpose());
}

}  // namespace rpl
