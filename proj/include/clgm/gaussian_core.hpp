#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "clgm/errors.hpp"

namespace clgm {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Symmetric matrix intended to be positive definite. The input is replaced
/// by (A + A^T) / 2; relative asymmetry above 1e-12 is recorded.
template <typename Scalar>
class SpdMatrix {
 public:
  static constexpr Scalar kAsymmetryTolerance = Scalar(1e-12);

  template <typename Derived>
  explicit SpdMatrix(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols() || a.rows() < 1)
      throw DimensionMismatch("SpdMatrix: expected a non-empty square matrix");
    const Scalar scale = a.cwiseAbs().maxCoeff();
    asymmetry_ = scale > Scalar(0)
                     ? (a - a.transpose()).cwiseAbs().maxCoeff() / scale
                     : Scalar(0);
    values_ = (a + a.transpose()) / Scalar(2);
  }

  Eigen::Index size() const { return values_.rows(); }
  const Matrix<Scalar>& matrix() const { return values_; }
  Scalar asymmetry() const { return asymmetry_; }
  bool asymmetry_warning() const { return asymmetry_ > kAsymmetryTolerance; }

 private:
  Matrix<Scalar> values_;
  Scalar asymmetry_ = Scalar(0);
};

/// Lower-triangular Cholesky factor L with L L^T = A. No pivoting.
template <typename Scalar>
class CholFactor {
 public:
  explicit CholFactor(const SpdMatrix<Scalar>& a) : llt_(a.matrix()) {
    if (llt_.info() != Eigen::Success)
      throw NotPositiveDefinite("cholesky: matrix is not positive definite");
    const auto diag = llt_.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      if (!(diag(i) > Scalar(0)) || !std::isfinite(static_cast<double>(diag(i))))
        throw NotPositiveDefinite("cholesky: non-positive pivot");
    }
  }

  Eigen::Index size() const { return llt_.matrixLLT().rows(); }
  Matrix<Scalar> lower() const { return llt_.matrixL(); }
  const Eigen::LLT<Matrix<Scalar>>& llt() const { return llt_; }

 private:
  Eigen::LLT<Matrix<Scalar>> llt_;
};

template <typename Scalar>
CholFactor<Scalar> cholesky(const SpdMatrix<Scalar>& a) {
  return CholFactor<Scalar>(a);
}

template <typename Derived>
CholFactor<typename Derived::Scalar> cholesky(const Eigen::MatrixBase<Derived>& a) {
  return CholFactor<typename Derived::Scalar>(SpdMatrix<typename Derived::Scalar>(a));
}

template <typename Scalar>
Scalar log_det(const CholFactor<Scalar>& f) {
  return Scalar(2) * f.llt().matrixLLT().diagonal().array().log().sum();
}

template <typename Scalar, typename Derived>
Vector<Scalar> solve_spd(const CholFactor<Scalar>& f, const Eigen::MatrixBase<Derived>& b) {
  if (b.rows() != f.size())
    throw DimensionMismatch("solve_spd: right-hand side has the wrong length");
  return f.llt().solve(b);
}

/// diag(A^-1) from the columns of L^-1: (A^-1)_ii = sum_k (L^-1)_ki^2.
template <typename Scalar>
Vector<Scalar> diag_of_inverse(const CholFactor<Scalar>& f) {
  const Eigen::Index n = f.size();
  Matrix<Scalar> linv = Matrix<Scalar>::Identity(n, n);
  f.llt().matrixL().solveInPlace(linv);
  return linv.colwise().squaredNorm().transpose();
}

}  // namespace clgm
