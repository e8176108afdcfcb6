#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "cwfa/error.hpp"

namespace cwfa {

/// Lambda Lambda' + diag(psi).
inline Eigen::MatrixXd sigma_from_factors(const Eigen::MatrixXd& loadings,
                                          const Eigen::VectorXd& uniquenesses) {
  if (!(uniquenesses.array() > 0.0).all()) {
    throw InvalidParameter("uniquenesses must be positive");
  }
  Eigen::MatrixXd sigma = loadings * loadings.transpose();
  sigma.diagonal() += uniquenesses;
  return sigma;
}

struct InverseLogDet {
  Eigen::MatrixXd inverse;
  double log_det = 0.0;
};

/// Inverse and log-determinant of Lambda Lambda' + Psi through a single
/// q x q Cholesky factorization:
///
///   Sigma^-1   = Psi^-1 - Psi^-1 Lambda M^-1 Lambda' Psi^-1
///   log|Sigma| = log|Psi| + log|M|,     M = I_q + Lambda' Psi^-1 Lambda
inline InverseLogDet woodbury_inverse_logdet(const Eigen::MatrixXd& loadings,
                                             const Eigen::VectorXd& uniquenesses) {
  if (!(uniquenesses.array() > 0.0).all()) {
    throw InvalidParameter("uniquenesses must be positive");
  }
  const Eigen::Index q = loadings.cols();
  const Eigen::VectorXd psi_inv = uniquenesses.cwiseInverse();
  const Eigen::MatrixXd scaled = psi_inv.asDiagonal() * loadings;  // Psi^-1 Lambda

  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(q, q);
  inner.noalias() += loadings.transpose() * scaled;
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success || !inner.allFinite()) {
    throw DegenerateCovariance("I + Lambda' Psi^-1 Lambda is not positive definite");
  }

  InverseLogDet out;
  out.log_det = uniquenesses.array().log().sum() +
                2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.inverse = -scaled * llt.solve(scaled.transpose());
  out.inverse.diagonal() += psi_inv;
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
  if (!std::isfinite(out.log_det) || !out.inverse.allFinite()) {
    throw DegenerateCovariance("non-finite covariance inverse");
  }
  return out;
}

}  // namespace cwfa
