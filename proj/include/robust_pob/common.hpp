// Shared aliases, error types and small dense-algebra helpers.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace robust_pob {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Thrown when arguments violate a documented precondition.
struct invalid_argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when matrix/vector shapes do not conform.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an exhaustive-enumeration guard (m^N cap) is exceeded.
struct size_guard_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invalid_argument_error(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw dimension_error(msg);
}

inline double min_eigenvalue(const Mat& S) {
  if (S.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const Mat& S, double tol = 1e-12) {
  if (S.rows() != S.cols()) return false;
  return (S - S.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + S.cwiseAbs().maxCoeff());
}

// Symmetric PSD square root with negative eigenvalues clipped to zero below `clip`.
inline Mat psd_sqrt(const Mat& S, double clip = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  Vec lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = lam[i] > clip ? std::sqrt(lam[i]) : 0.0;
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Rank-truncated factor R with R^T R = S (PSD up to clipping); R has rank(S) rows.
inline Mat psd_factor(const Mat& S, double clip = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
  const Vec& lam = es.eigenvalues();
  int r = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] > clip) ++r;
  Mat R(r, S.cols());
  int row = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] > clip) R.row(row++) = std::sqrt(lam[i]) * es.eigenvectors().col(i).transpose();
  }
  return R;
}

inline double rel_frobenius_error(const Mat& got, const Mat& want) {
  double scale = want.norm();
  return (got - want).norm() / (scale > 0 ? scale : 1.0);
}

}  // namespace robust_pob
