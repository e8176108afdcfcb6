#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "cwfa/error.hpp"

namespace cwfa {

struct FactorStart {
  Eigen::MatrixXd loadings;      // p x q
  Eigen::VectorXd uniquenesses;  // p
};

/// Loadings from the top-q eigenpairs of a scatter matrix, lambda_ij =
/// sqrt(d_j) rho_ij, and uniquenesses diag(S - Lambda Lambda') floored at
/// min_psi. Each eigenvector is signed so its largest-magnitude entry is
/// positive (first such entry on ties); negative eigenvalues count as zero.
inline FactorStart eigen_init(const Eigen::MatrixXd& scatter, int q,
                              double min_psi = 1e-8) {
  const auto p = scatter.rows();
  if (scatter.cols() != p) throw InvalidInput("scatter matrix must be square");
  if (q < 1 || q > p) throw InvalidInput("q must satisfy 1 <= q <= p");

  const Eigen::MatrixXd sym = 0.5 * (scatter + scatter.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw InvalidInput("eigen-decomposition of scatter matrix failed");
  }
  // Eigen returns eigenvalues in increasing order.
  FactorStart out;
  out.loadings.resize(p, q);
  for (int j = 0; j < q; ++j) {
    const Eigen::Index col = p - 1 - j;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < p; ++i) {
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v(arg) < 0.0) v = -v;
    const double d = std::max(eig.eigenvalues()(col), 0.0);
    out.loadings.col(j) = std::sqrt(d) * v;
  }
  out.uniquenesses =
      (sym.diagonal() - out.loadings.rowwise().squaredNorm())
          .cwiseMax(min_psi);
  return out;
}

}  // namespace cwfa
