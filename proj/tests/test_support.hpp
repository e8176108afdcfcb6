#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/cwfa.hpp"

namespace cwfa::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = z(rng);
  }
  return m;
}

inline Eigen::VectorXd random_positive(Eigen::Index n, std::mt19937_64& rng, double lo = 0.2,
                                       double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Random parameters satisfying every constraint of `code`. Means are spread
/// `separation` apart along random directions.
inline CWFAParams random_params(const ConstraintCode& code, int G, int p, int q,
                                std::mt19937_64& rng, double separation = 8.0) {
  CWFAParams params;
  params.code = code;
  params.p = p;
  params.q = q;
  const Eigen::MatrixXd shared_l = random_matrix(p, q, rng);
  Eigen::VectorXd shared_psi = random_positive(p, rng);
  if (code.psi_isotropic) shared_psi.setConstant(shared_psi(0));
  const double shared_sigma = random_positive(1, rng)(0);
  const Eigen::VectorXd w = random_positive(G, rng, 0.5, 1.0);
  for (int g = 0; g < G; ++g) {
    ComponentParams c;
    c.weight = w(g) / w.sum();
    c.mean = random_matrix(p, 1, rng, separation);
    c.slope = random_matrix(p, 1, rng);
    c.intercept = random_matrix(1, 1, rng, 3.0)(0, 0);
    c.noise_var = code.sigma_equal ? shared_sigma : random_positive(1, rng)(0);
    c.loadings = code.lambda_equal ? shared_l : random_matrix(p, q, rng);
    if (code.psi_equal) {
      c.uniquenesses = shared_psi;
    } else {
      c.uniquenesses = random_positive(p, rng);
      if (code.psi_isotropic) c.uniquenesses.setConstant(c.uniquenesses(0));
    }
    params.components.push_back(std::move(c));
  }
  // Renormalize exactly: the last weight absorbs rounding.
  double rest = 0.0;
  for (int g = 0; g + 1 < G; ++g) rest += params.components[g].weight;
  params.components.back().weight = 1.0 - rest;
  return params;
}

/// Dataset drawn from `params` with the given group sizes.
inline SimulatedData draw(const CWFAParams& params, const std::vector<int>& sizes,
                          std::uint64_t seed) {
  return sample_dataset(SimSpec::from_params(params, sizes, seed));
}

inline Eigen::MatrixXd dense_sigma(const ComponentParams& c) {
  Eigen::MatrixXd s = c.loadings * c.loadings.transpose();
  s.diagonal() += c.uniquenesses;
  return s;
}

/// Joint log-density computed the long way: full inverse and determinant.
inline long double dense_log_density(const Eigen::VectorXd& x, double y,
                                     const ComponentParams& c) {
  const Eigen::MatrixXd s = dense_sigma(c);
  const Eigen::MatrixXd inv = s.inverse();
  const long double logdet = std::log(static_cast<long double>(s.determinant()));
  const Eigen::VectorXd d = x - c.mean;
  const long double quad = d.dot(inv * d);
  const long double pi2 = 2.0L * 3.141592653589793238462643383279502884L;
  const long double p = static_cast<long double>(x.size());
  const long double r = y - c.intercept - c.slope.dot(x);
  return -0.5L * (p * std::log(pi2) + logdet + quad) -
         0.5L * (std::log(pi2 * c.noise_var) + r * r / c.noise_var);
}

inline std::vector<ConstraintCode> all_codes() {
  const auto a = ConstraintCode::all();
  return {a.begin(), a.end()};
}

}  // namespace cwfa::testing
