#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/density.hpp"
#include "cwfa/eigen_init.hpp"
#include "cwfa/linalg.hpp"
#include "cwfa/model.hpp"

namespace cwfa {

struct FitConfig {
  double epsilon = 0.05;       // Aitken tolerance
  int max_outer_iters = 1000;
  double inner_tol = 1e-6;     // max-norm change of (Lambda, Psi)
  int max_inner_iters = 50;
  double min_sigma2 = 1e-8;
  double min_psi = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be > 0");
    if (!(inner_tol > 0.0)) throw InvalidParameter("inner_tol must be > 0");
    if (!(min_sigma2 > 0.0) || !(min_psi > 0.0)) {
      throw InvalidParameter("variance floors must be > 0");
    }
    if (max_outer_iters < 1 || max_inner_iters < 1) {
      throw InvalidParameter("iteration caps must be >= 1");
    }
  }
};

/// Output of the first CM-step: weights, means and regression parameters.
struct RegressionUpdate {
  Eigen::VectorXd counts;   // n_g
  Eigen::VectorXd weights;  // pi_g
  std::vector<Eigen::VectorXd> means;
  Eigen::VectorXd intercepts;
  std::vector<Eigen::VectorXd> slopes;
  Eigen::VectorXd noise_vars;
};

struct ScatterStats {
  std::vector<Eigen::MatrixXd> scatter;  // S_g
  Eigen::VectorXd counts;                // n_g
};

struct GammaTheta {
  Eigen::MatrixXd gamma;  // q x p
  Eigen::MatrixXd theta;  // q x q
};

struct LatentMoments {
  std::vector<Eigen::MatrixXd> gamma;
  std::vector<Eigen::MatrixXd> theta;
  std::vector<Eigen::MatrixXd> scatter;
  Eigen::VectorXd counts;
};

/// Per-component loadings and uniquenesses. Shared quantities are stored as
/// identical copies.
struct FactorState {
  std::vector<Eigen::MatrixXd> loadings;
  std::vector<Eigen::VectorXd> uniquenesses;
};

struct Cycle2Result {
  FactorState factors;
  int inner_iterations = 0;
  bool converged = false;
};

struct FitResult {
  CWFAParams params;
  Responsibilities responsibilities;
  Partition map_labels;
  std::vector<double> loglik_trace;  // entry 0 is the initial value
  double final_loglik = 0.0;
  long eta = 0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;
  int inner_nonconverged = 0;  // outer iterations whose inner loop hit the cap
};

// ---------------------------------------------------------------------------
// Cycle 1

/// Closed-form updates of pi, mu, beta and sigma^2 given responsibilities.
/// With sigma_equal the variance is pooled as sum_g n_g sigma^2_g / n.
inline RegressionUpdate cycle1_update(const Dataset& data, const Responsibilities& z,
                                      const ConstraintCode& code,
                                      const FitConfig& config = {},
                                      int iteration = 0) {
  const int n = data.n();
  const int G = static_cast<int>(z.cols());
  if (z.rows() != n) throw InvalidInput("responsibility rows differ from data rows");

  RegressionUpdate out;
  out.counts = z.colwise().sum().transpose();
  out.weights = out.counts / out.counts.sum();
  out.means.resize(G);
  out.slopes.resize(G);
  out.intercepts.resize(G);
  out.noise_vars.resize(G);

  for (int g = 0; g < G; ++g) {
    const double ng = out.counts(g);
    if (!(ng >= 2.0)) throw DegenerateComponent(g, iteration, ng);
    const Eigen::VectorXd w = z.col(g);

    const Eigen::VectorXd mu = (data.x.transpose() * w) / ng;
    const double ybar = w.dot(data.y) / ng;
    const Eigen::MatrixXd centered = data.x.rowwise() - mu.transpose();
    const Eigen::MatrixXd sxx =
        centered.transpose() * w.asDiagonal() * centered / ng;
    const Eigen::VectorXd sxy = centered.transpose() * w.cwiseProduct(data.y) / ng;

    Eigen::LLT<Eigen::MatrixXd> llt(sxx);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      throw SingularRegression(g);
    }
    const Eigen::VectorXd beta1 = llt.solve(sxy);
    const double beta0 = ybar - beta1.dot(mu);
    const Eigen::VectorXd resid =
        (data.y - data.x * beta1).array() - beta0;
    out.means[g] = mu;
    out.slopes[g] = beta1;
    out.intercepts(g) = beta0;
    out.noise_vars(g) = w.dot(resid.cwiseAbs2()) / ng;
  }

  if (code.sigma_equal) {
    double pooled = 0.0;
    for (int g = 0; g < G; ++g) pooled += out.counts(g) * out.noise_vars(g);
    pooled /= out.counts.sum();
    out.noise_vars.setConstant(std::max(pooled, config.min_sigma2));
  } else {
    out.noise_vars = out.noise_vars.cwiseMax(config.min_sigma2);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cycle 2

/// S_g = (1/n_g) sum_i z_ig (x_i - mu_g)(x_i - mu_g)'.
inline ScatterStats compute_scatter(const Dataset& data, const Responsibilities& z,
                                    const std::vector<Eigen::VectorXd>& means) {
  const int G = static_cast<int>(z.cols());
  if (static_cast<int>(means.size()) != G) throw InvalidInput("one mean per component required");
  ScatterStats out;
  out.counts = z.colwise().sum().transpose();
  out.scatter.resize(G);
  for (int g = 0; g < G; ++g) {
    const double ng = out.counts(g);
    if (!(ng > 0.0)) throw DegenerateComponent(g, 0, ng);
    const Eigen::MatrixXd centered = data.x.rowwise() - means[g].transpose();
    Eigen::MatrixXd s = centered.transpose() * z.col(g).asDiagonal() * centered / ng;
    out.scatter[g] = 0.5 * (s + s.transpose());
  }
  return out;
}

/// gamma = Lambda' (Lambda Lambda' + Psi)^-1, Theta = I - gamma Lambda + gamma S gamma'.
inline GammaTheta compute_gamma_theta(const Eigen::MatrixXd& loadings,
                                      const Eigen::VectorXd& uniquenesses,
                                      const Eigen::MatrixXd& scatter) {
  const auto inv = woodbury_inverse_logdet(loadings, uniquenesses);
  GammaTheta out;
  out.gamma = loadings.transpose() * inv.inverse;
  const auto q = loadings.cols();
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(q, q) - out.gamma * loadings +
                          out.gamma * scatter * out.gamma.transpose();
  out.theta = 0.5 * (theta + theta.transpose());
  return out;
}

inline LatentMoments latent_moments(const ScatterStats& stats, const FactorState& factors) {
  LatentMoments m;
  m.scatter = stats.scatter;
  m.counts = stats.counts;
  const auto G = stats.scatter.size();
  m.gamma.resize(G);
  m.theta.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    auto gt = compute_gamma_theta(factors.loadings[g], factors.uniquenesses[g],
                                  stats.scatter[g]);
    m.gamma[g] = std::move(gt.gamma);
    m.theta[g] = std::move(gt.theta);
  }
  return m;
}

namespace detail {

inline Eigen::MatrixXd regularized(const Eigen::MatrixXd& theta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(theta, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 1e-12) {
    return theta + 1e-10 * Eigen::MatrixXd::Identity(theta.rows(), theta.cols());
  }
  return theta;
}

/// A X^-1 for symmetric positive definite X.
inline Eigen::MatrixXd right_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  return x.ldlt().solve(a.transpose()).transpose();
}

/// One conditional-maximization sweep of Lambda then Psi, using the current
/// gamma/Theta and (for shared-loading codes) the current Psi as weights.
inline FactorState factor_sweep(const ConstraintCode& code, const FactorState& current,
                                const std::vector<Eigen::MatrixXd>& gamma,
                                const std::vector<Eigen::MatrixXd>& theta,
                                const std::vector<Eigen::MatrixXd>& scatter,
                                const Eigen::VectorXd& counts) {
  const int G = static_cast<int>(scatter.size());
  const auto p = scatter.front().rows();
  const auto q = current.loadings.front().cols();
  const double n = counts.sum();
  const Eigen::VectorXd w = counts / n;

  FactorState next;
  next.loadings.resize(G);
  next.uniquenesses.resize(G);

  auto isotropic = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd::Constant(p, v.mean());
  };

  if (!code.lambda_equal) {
    std::vector<Eigen::VectorXd> resid(G);
    for (int g = 0; g < G; ++g) {
      const Eigen::MatrixXd sg = scatter[g] * gamma[g].transpose();  // S gamma'
      next.loadings[g] = right_solve(sg, theta[g]);
      resid[g] = scatter[g].diagonal() -
                 (next.loadings[g] * gamma[g] * scatter[g]).diagonal();
    }
    if (code.psi_equal) {
      Eigen::VectorXd pooled = Eigen::VectorXd::Zero(p);
      for (int g = 0; g < G; ++g) pooled += w(g) * resid[g];
      if (code.psi_isotropic) pooled = isotropic(pooled);
      for (int g = 0; g < G; ++g) next.uniquenesses[g] = pooled;
    } else {
      for (int g = 0; g < G; ++g) {
        next.uniquenesses[g] = code.psi_isotropic ? isotropic(resid[g]) : resid[g];
      }
    }
    return next;
  }

  if (code.psi_equal) {
    // Shared Lambda and Psi: gamma is common, pool S and Theta with pi_g.
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd th = Eigen::MatrixXd::Zero(q, q);
    for (int g = 0; g < G; ++g) {
      s += w(g) * scatter[g];
      th += w(g) * theta[g];
    }
    const Eigen::MatrixXd& gm = gamma.front();
    const Eigen::MatrixXd lambda = right_solve(s * gm.transpose(), th);
    Eigen::VectorXd psi = s.diagonal() - (lambda * gm * s).diagonal();
    if (code.psi_isotropic) psi = isotropic(psi);
    for (int g = 0; g < G; ++g) {
      next.loadings[g] = lambda;
      next.uniquenesses[g] = psi;
    }
    return next;
  }

  // Shared Lambda, group-specific Psi: solve row by row,
  //   lambda_i = r_i (sum_g n_g / psi_g(i) Theta_g)^-1,
  //   r_i = i-th row of sum_g n_g / psi_g(i) S_g gamma_g'.
  std::vector<Eigen::MatrixXd> sg(G);
  for (int g = 0; g < G; ++g) sg[g] = scatter[g] * gamma[g].transpose();
  Eigen::MatrixXd lambda(p, q);
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(q);
    for (int g = 0; g < G; ++g) {
      const double c = counts(g) / current.uniquenesses[g](i);
      a += c * theta[g];
      r += c * sg[g].row(i);
    }
    lambda.row(i) = a.ldlt().solve(r.transpose()).transpose();
  }
  for (int g = 0; g < G; ++g) {
    next.loadings[g] = lambda;
    const Eigen::VectorXd d =
        scatter[g].diagonal() - 2.0 * (lambda * gamma[g] * scatter[g]).diagonal() +
        (lambda * theta[g] * lambda.transpose()).diagonal();
    next.uniquenesses[g] = code.psi_isotropic ? isotropic(d) : d;
  }
  return next;
}

}  // namespace detail

/// Inner Lambda/Psi iteration of the second cycle: alternate the constrained
/// CM-step with a refresh of gamma/Theta until the max-norm change of
/// (Lambda, Psi) drops below inner_tol or max_inner_iters sweeps are done.
/// A non-converged loop returns its last iterate with converged = false.
inline Cycle2Result cycle2_update(const ConstraintCode& code, const LatentMoments& moments,
                                  const FactorState& current, const FitConfig& config = {}) {
  const int G = static_cast<int>(moments.scatter.size());
  if (G == 0 || static_cast<int>(current.loadings.size()) != G ||
      static_cast<int>(current.uniquenesses.size()) != G) {
    throw InvalidInput("cycle2_update: component counts differ");
  }
  Cycle2Result out;
  FactorState state = current;
  std::vector<Eigen::MatrixXd> gamma = moments.gamma;
  std::vector<Eigen::MatrixXd> theta = moments.theta;

  for (int it = 1; it <= config.max_inner_iters; ++it) {
    for (auto& t : theta) t = detail::regularized(t);
    FactorState next =
        detail::factor_sweep(code, state, gamma, theta, moments.scatter, moments.counts);

    double change = 0.0;
    for (int g = 0; g < G; ++g) {
      next.uniquenesses[g] = next.uniquenesses[g].cwiseMax(config.min_psi);
      change = std::max(change, (next.loadings[g] - state.loadings[g]).cwiseAbs().maxCoeff());
      change = std::max(change,
                        (next.uniquenesses[g] - state.uniquenesses[g]).cwiseAbs().maxCoeff());
    }
    for (int g = 0; g < G; ++g) {
      auto gt = compute_gamma_theta(next.loadings[g], next.uniquenesses[g],
                                    moments.scatter[g]);
      gamma[g] = std::move(gt.gamma);
      theta[g] = std::move(gt.theta);
    }
    state = std::move(next);
    out.inner_iterations = it;
    if (change < config.inner_tol) {
      out.converged = true;
      break;
    }
  }
  out.factors = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------
// Stopping rule

/// Aitken-accelerated stopping test on three consecutive log-likelihoods.
/// With a = (l_next - l_curr) / (l_curr - l_prev) and
/// l_inf = l_curr + (l_next - l_curr) / (1 - a), stops iff
/// 0 <= l_inf - l_curr < epsilon. A flat step (l_next - l_curr < 1e-12) stops;
/// a vanishing denominator or a outside (0, 1 - 1e-12) falls back to
/// l_next - l_curr < epsilon * 1e-3.
inline bool aitken_stop(double l_prev, double l_curr, double l_next, double epsilon) {
  const double step = l_next - l_curr;
  const double prev_step = l_curr - l_prev;
  if (step < 1e-12) return true;
  if (prev_step < 1e-12) return step < epsilon * 1e-3;
  const double a = step / prev_step;
  if (!(a > 0.0) || a >= 1.0 - 1e-12) return step < epsilon * 1e-3;
  const double l_inf = l_curr + step / (1.0 - a);
  const double gap = l_inf - l_curr;
  return gap >= 0.0 && gap < epsilon;
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

inline Responsibilities one_hot(const Partition& part, int G) {
  Responsibilities z = Responsibilities::Zero(static_cast<Eigen::Index>(part.size()), G);
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (part[i] < 0 || part[i] >= G) {
      throw InvalidInput("initial partition entry out of range on row " +
                         std::to_string(i + 1));
    }
    z(static_cast<Eigen::Index>(i), part[i]) = 1.0;
  }
  return z;
}

inline FactorState factors_of(const CWFAParams& params) {
  FactorState f;
  for (const auto& c : params.components) {
    f.loadings.push_back(c.loadings);
    f.uniquenesses.push_back(c.uniquenesses);
  }
  return f;
}

inline CWFAParams assemble(const ConstraintCode& code, int q, const RegressionUpdate& reg,
                           const FactorState& factors) {
  CWFAParams params;
  params.code = code;
  params.q = q;
  params.p = static_cast<int>(reg.means.front().size());
  const auto G = reg.means.size();
  params.components.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    auto& c = params.components[g];
    c.weight = reg.weights(static_cast<Eigen::Index>(g));
    c.intercept = reg.intercepts(static_cast<Eigen::Index>(g));
    c.slope = reg.slopes[g];
    c.noise_var = reg.noise_vars(static_cast<Eigen::Index>(g));
    c.mean = reg.means[g];
    c.loadings = factors.loadings[g];
    c.uniquenesses = factors.uniquenesses[g];
  }
  return params;
}

inline double objective_from_log_weights(const Eigen::MatrixXd& lw, const Dataset& data) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < lw.rows(); ++i) {
    total += data.is_labeled(static_cast<int>(i))
                 ? lw(i, data.labels[static_cast<std::size_t>(i)])
                 : log_sum_exp(lw.row(i));
  }
  return total;
}

}  // namespace detail

/// Starting loadings/uniquenesses from per-group scatters. Shared quantities
/// come from the pooled scatter sum_g (n_g/n) S_g; group-specific
/// uniquenesses are diag(S_g - Lambda_g Lambda_g') for the loadings in use.
/// Isotropic codes average the diagonal.
inline FactorState initial_factors(const ConstraintCode& code, const ScatterStats& stats,
                                   int q, const FitConfig& config = {}) {
  const int G = static_cast<int>(stats.scatter.size());
  const auto p = stats.scatter.front().rows();
  const Eigen::VectorXd w = stats.counts / stats.counts.sum();
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(p, p);
  for (int g = 0; g < G; ++g) pooled += w(g) * stats.scatter[g];
  const FactorStart pooled_start = eigen_init(pooled, q, config.min_psi);

  FactorState f;
  f.loadings.resize(G);
  f.uniquenesses.resize(G);
  for (int g = 0; g < G; ++g) {
    if (code.lambda_equal) {
      f.loadings[g] = pooled_start.loadings;
      f.uniquenesses[g] = (stats.scatter[g].diagonal() -
                           pooled_start.loadings.rowwise().squaredNorm())
                              .cwiseMax(config.min_psi);
    } else {
      FactorStart s = eigen_init(stats.scatter[g], q, config.min_psi);
      f.loadings[g] = std::move(s.loadings);
      f.uniquenesses[g] = std::move(s.uniquenesses);
    }
  }
  if (code.psi_equal) {
    for (int g = 0; g < G; ++g) f.uniquenesses[g] = pooled_start.uniquenesses;
  }
  if (code.psi_isotropic) {
    for (int g = 0; g < G; ++g) {
      f.uniquenesses[g] = Eigen::VectorXd::Constant(p, f.uniquenesses[g].mean());
    }
  }
  return f;
}

/// Runs the two-cycle algorithm from a complete starting parameter set.
/// Rows of `data` with known labels keep indicator responsibilities
/// throughout, and the recorded objective counts them only under their
/// label.
inline FitResult fit_from(const Dataset& data, const CWFAParams& start,
                          const FitConfig& config = {}) {
  data.validate();
  config.validate();
  start.validate();
  if (start.p != data.p()) throw InvalidInput("model and data dimensions differ");
  data.validate_labels(start.G());

  const ConstraintCode code = start.code;
  const int q = start.q;
  CWFAParams params = start;
  FactorState factors = detail::factors_of(params);

  FitResult result;
  Eigen::MatrixXd lw = weighted_log_densities(data, params);
  result.loglik_trace.push_back(detail::objective_from_log_weights(lw, data));

  for (int k = 1; k <= config.max_outer_iters; ++k) {
    // Cycle 1: E-step on the labels, CM-step on pi, mu, beta, sigma^2.
    const Responsibilities z = responsibilities_from_log_weights(lw, data);
    const RegressionUpdate reg = cycle1_update(data, z, code, config, k);

    // Cycle 2: latent-factor moments and the constrained Lambda/Psi update.
    const ScatterStats stats = compute_scatter(data, z, reg.means);
    const LatentMoments moments = latent_moments(stats, factors);
    Cycle2Result c2 = cycle2_update(code, moments, factors, config);
    if (!c2.converged) ++result.inner_nonconverged;
    factors = std::move(c2.factors);

    params = detail::assemble(code, q, reg, factors);
    lw = weighted_log_densities(data, params);
    result.loglik_trace.push_back(detail::objective_from_log_weights(lw, data));
    result.iterations = k;

    const auto m = result.loglik_trace.size();
    if (m >= 3 && aitken_stop(result.loglik_trace[m - 3], result.loglik_trace[m - 2],
                              result.loglik_trace[m - 1], config.epsilon)) {
      result.converged = true;
      break;
    }
  }

  result.params = std::move(params);
  result.responsibilities = responsibilities_from_log_weights(lw, data);
  result.map_labels = map_labels(result.responsibilities);
  result.final_loglik = result.loglik_trace.back();
  result.eta = count_free_parameters(code, result.params.G(), result.params.p, q);
  result.bic = bic(result.final_loglik, result.eta, data.n());
  return result;
}

/// Fits one model from a hard initial partition. The starting parameters are
/// the first CM-step on the partition plus eigen-based Lambda/Psi.
inline FitResult fit(const Dataset& data, const ConstraintCode& code, int G, int q,
                     const Partition& init_z, const FitConfig& config = {}) {
  data.validate();
  config.validate();
  if (G < 1) throw InvalidInput("G must be >= 1");
  if (q < 1 || q > data.p()) throw InvalidInput("q must satisfy 1 <= q <= p");
  if (init_z.size() != static_cast<std::size_t>(data.n())) {
    throw InvalidInput("initial partition length differs from row count");
  }
  data.validate_labels(G);
  for (int i = 0; i < data.n(); ++i) {
    if (data.is_labeled(i) && init_z[static_cast<std::size_t>(i)] != data.labels[i]) {
      throw InvalidInput("initial partition disagrees with the label on row " +
                         std::to_string(i + 1));
    }
  }
  const Responsibilities z0 = detail::one_hot(init_z, G);
  const RegressionUpdate reg = cycle1_update(data, z0, code, config, 0);
  const ScatterStats stats = compute_scatter(data, z0, reg.means);
  const FactorState factors = initial_factors(code, stats, q, config);
  return fit_from(data, detail::assemble(code, q, reg, factors), config);
}

}  // namespace cwfa
