#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/linalg.hpp"
#include "cwfa/model.hpp"

namespace cwfa {

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Per-component quantities that do not depend on the observation.
struct ComponentKernel {
  Eigen::MatrixXd sigma_inv;
  double x_const = 0.0;  // -p/2 log 2pi - 1/2 log|Sigma|
  double y_const = 0.0;  // -1/2 log(2 pi sigma^2)

  explicit ComponentKernel(const ComponentParams& c) {
    const auto inv = woodbury_inverse_logdet(c.loadings, c.uniquenesses);
    sigma_inv = inv.inverse;
    x_const = -0.5 * double(c.mean.size()) * kLog2Pi - 0.5 * inv.log_det;
    y_const = -0.5 * (kLog2Pi + std::log(c.noise_var));
  }

  template <typename Row>
  double log_density(const Row& x, double y, const ComponentParams& c) const {
    const double resid = y - c.intercept - c.slope.dot(x);
    const Eigen::VectorXd d = x.transpose() - c.mean;
    return y_const - 0.5 * resid * resid / c.noise_var + x_const -
           0.5 * d.dot(sigma_inv * d);
  }
};

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

/// log phi(y | b0 + b1'x, sigma^2) + log phi(x; mu, Lambda Lambda' + Psi).
inline double component_log_density(const Eigen::VectorXd& x, double y,
                                    const ComponentParams& comp) {
  if (!(comp.noise_var > 0.0)) throw InvalidParameter("noise variance must be > 0");
  const detail::ComponentKernel kernel(comp);
  return kernel.log_density(x.transpose(), y, comp);
}

/// n x G matrix of log(pi_g) + component log-density.
inline Eigen::MatrixXd weighted_log_densities(const Dataset& data,
                                              const CWFAParams& params) {
  if (data.p() != params.p) throw InvalidInput("dataset and model dimensions differ");
  const int n = data.n();
  const int G = params.G();
  Eigen::MatrixXd out(n, G);
  for (int g = 0; g < G; ++g) {
    const auto& comp = params.components[g];
    if (!(comp.noise_var > 0.0) || !(comp.weight > 0.0)) {
      throw InvalidParameter("component " + std::to_string(g + 1) +
                             " has a non-positive weight or variance");
    }
    const detail::ComponentKernel kernel(comp);
    const double log_w = std::log(comp.weight);
    for (int i = 0; i < n; ++i) {
      out(i, g) = log_w + kernel.log_density(data.x.row(i), data.y(i), comp);
    }
  }
  return out;
}

/// Observed-data mixture log-likelihood, sum_i log sum_g pi_g f_g(x_i, y_i).
inline double log_likelihood(const Dataset& data, const CWFAParams& params) {
  if (data.n() < 1) throw InvalidInput("dataset is empty");
  const Eigen::MatrixXd lw = weighted_log_densities(data, params);
  double total = 0.0;
  for (int i = 0; i < lw.rows(); ++i) total += detail::log_sum_exp(lw.row(i));
  return total;
}

/// Log-likelihood with labeled rows contributing only their known component,
/// log(pi_l f_l); unlabeled rows contribute the mixture term. Equals
/// log_likelihood when the dataset carries no labels.
inline double classification_log_likelihood(const Dataset& data,
                                            const CWFAParams& params) {
  if (data.n() < 1) throw InvalidInput("dataset is empty");
  const Eigen::MatrixXd lw = weighted_log_densities(data, params);
  double total = 0.0;
  for (int i = 0; i < lw.rows(); ++i) {
    total += data.is_labeled(i) ? lw(i, data.labels[i]) : detail::log_sum_exp(lw.row(i));
  }
  return total;
}

/// Normalizes weighted log-densities row by row; labeled rows become exact
/// 0/1 indicators.
inline Responsibilities responsibilities_from_log_weights(const Eigen::MatrixXd& lw,
                                                          const Dataset& data) {
  Responsibilities z(lw.rows(), lw.cols());
  for (int i = 0; i < lw.rows(); ++i) {
    if (data.is_labeled(i)) {
      z.row(i).setZero();
      z(i, data.labels[i]) = 1.0;
      continue;
    }
    const double lse = detail::log_sum_exp(lw.row(i));
    z.row(i) = (lw.row(i).array() - lse).exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

inline Responsibilities posterior_responsibilities(const Dataset& data,
                                                   const CWFAParams& params) {
  data.validate_labels(params.G());
  return responsibilities_from_log_weights(weighted_log_densities(data, params), data);
}

/// Row-wise arg-max; ties go to the lowest index.
inline Partition map_labels(const Responsibilities& z) {
  Partition out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int best = 0;
    for (Eigen::Index g = 1; g < z.cols(); ++g) {
      if (z(i, g) > z(i, best)) best = static_cast<int>(g);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace cwfa
