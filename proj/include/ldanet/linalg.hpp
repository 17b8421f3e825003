#pragma once

// Dense real linear algebra used by the LDA code: checked products, ridged SPD
// inversion and the symmetric-definite generalized eigenproblem.  Everything
// is templated on the scalar type and sits on top of Eigen.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ldanet/errors.hpp"

namespace ldanet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Relative, trace-scaled ridge applied to scatter/covariance matrices by default.
inline constexpr double kDefaultRidge = 1e-6;

/// Relative tolerance for the symmetry precondition.
inline constexpr double kSymmetryTolerance = 1e-9;

/// Eigenpairs sorted by descending eigenvalue; row i of `eigenvectors` pairs
/// with eigenvalues(i).  Rows have unit Euclidean norm and their entry of
/// largest magnitude is non-negative.
template <typename Scalar>
struct EigenDecomposition {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double rel_tol = kSymmetryTolerance) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const auto scale = m.cwiseAbs().maxCoeff();
  const auto asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  return asym <= rel_tol * scale;
}

template <typename DerivedA, typename DerivedB>
auto matmul(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix<Scalar> out = a * b;
  return out;
}

namespace detail {

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ShapeError(std::string(what) + ": matrix is not square");
  }
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": matrix has non-finite entries");
  }
  if (!is_symmetric(m)) {
    throw ShapeError(std::string(what) + ": matrix is not symmetric");
  }
}

// m + ridge * tr(m)/d * I
template <typename Derived>
Matrix<typename Derived::Scalar> ridged(const Eigen::MatrixBase<Derived>& m, double ridge) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = m;
  const auto d = m.rows();
  if (d > 0 && ridge != 0.0) {
    const Scalar shift = static_cast<Scalar>(ridge) * m.trace() / static_cast<Scalar>(d);
    out.diagonal().array() += shift;
  }
  return out;
}

// Flip so the largest-magnitude entry (first one on ties) is non-negative.
template <typename Derived>
void fix_sign(Eigen::MatrixBase<Derived>&& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
}

}  // namespace detail

/// Inverse of (m + ridge*tr(m)/d*I) through a Cholesky factorization.
template <typename Derived>
Matrix<typename Derived::Scalar> invert_spd(const Eigen::MatrixBase<Derived>& m,
                                            double ridge = 0.0) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(m, "invert_spd");
  const Matrix<Scalar> a = detail::ridged(m, ridge);
  Eigen::LLT<Matrix<Scalar>> llt(a);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("invert_spd: Cholesky factorization failed", ridge);
  }
  Matrix<Scalar> inv = llt.solve(Matrix<Scalar>::Identity(a.rows(), a.cols()));
  inv = (inv + inv.transpose()).eval() * Scalar(0.5);
  if (!inv.allFinite()) {
    throw SingularMatrixError("invert_spd: inverse is not finite", ridge);
  }
  return inv;
}

/// Solves S_B v = lambda (S_W + ridge*tr(S_W)/d*I) v.
///
/// S_W is Cholesky-factored as L L^T and the problem is reduced to the
/// symmetric eigenproblem of L^-1 S_B L^-T, whose eigenvectors y map back
/// through v = L^-T y.  This gives the eigenpairs of S_W^-1 S_B without ever
/// forming that non-symmetric product.
template <typename DerivedB, typename DerivedW>
EigenDecomposition<typename DerivedB::Scalar> generalized_eig(
    const Eigen::MatrixBase<DerivedB>& s_b, const Eigen::MatrixBase<DerivedW>& s_w,
    double ridge = kDefaultRidge) {
  using Scalar = typename DerivedB::Scalar;
  detail::require_symmetric(s_b, "generalized_eig(s_b)");
  detail::require_symmetric(s_w, "generalized_eig(s_w)");
  if (s_b.rows() != s_w.rows()) {
    throw ShapeError("generalized_eig: s_b and s_w differ in dimension");
  }
  const Eigen::Index d = s_b.rows();

  const Matrix<Scalar> w = detail::ridged(s_w, ridge);
  Eigen::LLT<Matrix<Scalar>> llt(w);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("generalized_eig: within-class matrix is not positive definite",
                              ridge);
  }
  const auto lower = llt.matrixL();
  const Matrix<Scalar> half = lower.solve(s_b);  // L^-1 S_B
  Matrix<Scalar> reduced = lower.solve(half.transpose());
  reduced = (reduced + reduced.transpose()).eval() * Scalar(0.5);

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(reduced);
  if (solver.info() != Eigen::Success) {
    throw SingularMatrixError("generalized_eig: eigensolver did not converge", ridge);
  }
  const Matrix<Scalar> back = llt.matrixU().solve(solver.eigenvectors());

  EigenDecomposition<Scalar> out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;  // solver returns ascending order
    out.eigenvalues(i) = solver.eigenvalues()(src);
    const Scalar norm = back.col(src).norm();
    out.eigenvectors.row(i) = back.col(src).transpose() / norm;
    detail::fix_sign(out.eigenvectors.row(i));
  }
  if (!out.eigenvalues.allFinite() || !out.eigenvectors.allFinite()) {
    throw SingularMatrixError("generalized_eig: non-finite eigenpairs", ridge);
  }
  return out;
}

}  // namespace ldanet
