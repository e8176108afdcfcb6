#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/constraint.hpp"
#include "cwfa/error.hpp"

namespace cwfa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Posterior membership probabilities, n x G.
using Responsibilities = MatrixXd;

/// Hard assignment of every row to a component, 0-based.
using Partition = std::vector<int>;

inline constexpr int kUnlabeled = -1;

/// Parameters of one mixture component: weight, linear regression of y on x,
/// and the factor-analytic marginal of x.
struct ComponentParams {
  double weight = 1.0;
  double intercept = 0.0;
  VectorXd slope;         // p
  double noise_var = 1.0;
  VectorXd mean;          // p
  MatrixXd loadings;      // p x q
  VectorXd uniquenesses;  // p, diagonal of Psi
};

struct CWFAParams {
  ConstraintCode code;
  std::vector<ComponentParams> components;
  int p = 0;
  int q = 0;

  int G() const { return static_cast<int>(components.size()); }

  /// Throws InvalidParameter when any structural or constraint invariant fails.
  /// Cross-component equalities are checked bit-exactly.
  void validate() const {
    if (components.empty()) throw InvalidParameter("no components");
    if (q < 1 || q > p) {
      throw InvalidParameter("latent dimension must satisfy 1 <= q <= p");
    }
    double total = 0.0;
    for (int g = 0; g < G(); ++g) {
      const auto& c = components[g];
      const std::string where = " (component " + std::to_string(g + 1) + ")";
      if (c.slope.size() != p || c.mean.size() != p ||
          c.uniquenesses.size() != p || c.loadings.rows() != p ||
          c.loadings.cols() != q) {
        throw InvalidParameter("dimension mismatch" + where);
      }
      if (!(c.weight > 0.0)) throw InvalidParameter("weight must be > 0" + where);
      if (!(c.noise_var > 0.0)) {
        throw InvalidParameter("noise variance must be > 0" + where);
      }
      if (!(c.uniquenesses.array() > 0.0).all()) {
        throw InvalidParameter("uniquenesses must be > 0" + where);
      }
      if (code.psi_isotropic &&
          !(c.uniquenesses.array() == c.uniquenesses(0)).all()) {
        throw InvalidParameter("isotropic uniquenesses differ" + where);
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw InvalidParameter("weights must sum to one");
    }
    const auto& first = components.front();
    for (int g = 1; g < G(); ++g) {
      const auto& c = components[g];
      if (code.sigma_equal && c.noise_var != first.noise_var) {
        throw InvalidParameter("noise variances not shared");
      }
      if (code.lambda_equal && c.loadings != first.loadings) {
        throw InvalidParameter("loadings not shared");
      }
      if (code.psi_equal && c.uniquenesses != first.uniquenesses) {
        throw InvalidParameter("uniquenesses not shared");
      }
    }
  }
};

/// n observations of (x, y) with optional known component labels.
/// labels is either empty (no labels at all) or has n entries, each
/// kUnlabeled or a 0-based component index.
struct Dataset {
  MatrixXd x;  // n x p
  VectorXd y;  // n
  std::vector<int> labels;

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
  bool has_labels() const {
    for (int l : labels) {
      if (l != kUnlabeled) return true;
    }
    return false;
  }
  bool is_labeled(int i) const {
    return !labels.empty() && labels[static_cast<std::size_t>(i)] != kUnlabeled;
  }

  void validate() const {
    if (x.rows() < 1) throw InvalidInput("dataset is empty");
    if (y.size() != x.rows()) throw InvalidInput("x and y row counts differ");
    if (!x.allFinite() || !y.allFinite()) {
      throw InvalidInput("dataset contains non-finite values");
    }
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(n())) {
      throw InvalidInput("label vector length differs from row count");
    }
  }

  /// Labeled entries must lie in [0, G).
  void validate_labels(int G) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int l = labels[i];
      if (l != kUnlabeled && (l < 0 || l >= G)) {
        throw InvalidInput("label " + std::to_string(l + 1) + " on row " +
                           std::to_string(i + 1) + " is outside 1.." +
                           std::to_string(G));
      }
    }
  }
};

/// Free covariance parameters of the joint model (Y-variance, loadings,
/// uniquenesses), as tabulated for the sixteen-model family.
inline long covariance_parameter_count(const ConstraintCode& code, int G, int p,
                                       int q) {
  if (G < 1 || p < 1 || q < 1) throw InvalidInput("G, p, q must be positive");
  if (q > p) throw InvalidInput("q must not exceed p");
  const long loading = long(p) * q - long(q) * (q - 1) / 2;
  long count = code.sigma_equal ? 1 : G;
  count += code.lambda_equal ? loading : G * loading;
  if (code.psi_equal) {
    count += code.psi_isotropic ? 1 : p;
  } else {
    count += code.psi_isotropic ? G : long(G) * p;
  }
  return count;
}

/// Total number of free parameters: (G-1) weights, Gp means, G(p+1)
/// regression coefficients, plus the covariance count.
inline long count_free_parameters(const ConstraintCode& code, int G, int p,
                                  int q) {
  const long cov = covariance_parameter_count(code, G, p, q);
  return (G - 1) + long(G) * p + long(G) * (p + 1) + cov;
}

/// Bayesian information criterion, 2 l - eta ln n. Larger is better.
inline double bic(double loglik, long eta, long n) {
  if (n < 1) throw InvalidInput("bic needs n >= 1");
  if (eta < 0) throw InvalidInput("bic needs eta >= 0");
  return 2.0 * loglik - double(eta) * std::log(double(n));
}

}  // namespace cwfa
