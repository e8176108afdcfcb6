#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/linalg.hpp"
#include "cwfa/model.hpp"

namespace cwfa {

/// x = mu + Lambda u + e with u ~ N(0, I_q), e ~ N(0, diag(psi)).
struct FactorForm {
  Eigen::MatrixXd loadings;
  Eigen::VectorXd uniquenesses;
};

/// x ~ N(mu, Sigma) directly.
struct CovarianceForm {
  Eigen::MatrixXd sigma;
};

struct SimGroup {
  int size = 0;
  Eigen::VectorXd mean;
  double intercept = 0.0;
  Eigen::VectorXd slope;
  double noise_var = 1.0;
  std::variant<FactorForm, CovarianceForm> covariance;
};

struct SimSpec {
  std::vector<SimGroup> groups;
  std::uint64_t seed = 0;

  int p() const { return groups.empty() ? 0 : static_cast<int>(groups.front().mean.size()); }
  int n() const {
    int total = 0;
    for (const auto& g : groups) total += g.size;
    return total;
  }

  /// Factor-form spec from a parameter set; component weights are ignored in
  /// favour of the explicit group sizes.
  static SimSpec from_params(const CWFAParams& params, const std::vector<int>& sizes,
                             std::uint64_t seed) {
    if (static_cast<int>(sizes.size()) != params.G()) {
      throw InvalidInput("one group size per component required");
    }
    SimSpec spec;
    spec.seed = seed;
    for (int g = 0; g < params.G(); ++g) {
      const auto& c = params.components[g];
      spec.groups.push_back({sizes[g], c.mean, c.intercept, c.slope, c.noise_var,
                             FactorForm{c.loadings, c.uniquenesses}});
    }
    return spec;
  }
};

struct SimulatedData {
  Dataset data;
  Partition truth;  // 0-based group of every row
};

/// Draws group_sizes[g] rows from every group, in group order. Printed
/// covariance matrices that are not exactly symmetric are symmetrized as
/// (Sigma + Sigma') / 2 before the Cholesky factorization.
inline SimulatedData sample_dataset(const SimSpec& spec) {
  if (spec.groups.empty()) throw InvalidInput("simulation spec has no groups");
  const int p = spec.p();
  const int n = spec.n();
  for (const auto& g : spec.groups) {
    if (g.size < 1) throw InvalidInput("group sizes must be >= 1");
    if (g.mean.size() != p || g.slope.size() != p) {
      throw InvalidInput("group dimensions differ");
    }
    if (!(g.noise_var >= 0.0)) throw InvalidInput("noise variance must be >= 0");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index len) {
    Eigen::VectorXd v(len);
    for (Eigen::Index i = 0; i < len; ++i) v(i) = normal(rng);
    return v;
  };

  SimulatedData out;
  out.data.x.resize(n, p);
  out.data.y.resize(n);
  out.truth.reserve(static_cast<std::size_t>(n));
  int row = 0;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const SimGroup& grp = spec.groups[g];
    Eigen::MatrixXd chol;
    if (const auto* cov = std::get_if<CovarianceForm>(&grp.covariance)) {
      if (cov->sigma.rows() != p || cov->sigma.cols() != p) {
        throw InvalidInput("covariance matrix has the wrong size");
      }
      const Eigen::MatrixXd sym = 0.5 * (cov->sigma + cov->sigma.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(sym);
      if (llt.info() != Eigen::Success) {
        throw InvalidInput("covariance of group " + std::to_string(g + 1) +
                           " is not positive definite");
      }
      chol = llt.matrixL();
    } else {
      const auto& f = std::get<FactorForm>(grp.covariance);
      if (f.loadings.rows() != p || f.uniquenesses.size() != p) {
        throw InvalidInput("factor form has the wrong size");
      }
      if (!(f.uniquenesses.array() > 0.0).all()) {
        throw InvalidInput("uniquenesses must be positive");
      }
    }
    const double sd = std::sqrt(grp.noise_var);
    for (int i = 0; i < grp.size; ++i, ++row) {
      Eigen::VectorXd x;
      if (chol.size() > 0) {
        x = grp.mean + chol * draw(p);
      } else {
        const auto& f = std::get<FactorForm>(grp.covariance);
        const Eigen::VectorXd u = draw(f.loadings.cols());
        const Eigen::VectorXd e = f.uniquenesses.cwiseSqrt().cwiseProduct(draw(p));
        x = grp.mean + f.loadings * u + e;
      }
      out.data.x.row(row) = x.transpose();
      out.data.y(row) = grp.intercept + grp.slope.dot(x) + sd * normal(rng);
      out.truth.push_back(static_cast<int>(g));
    }
  }
  return out;
}

namespace detail {

inline Eigen::MatrixXd mat5(std::initializer_list<double> v) {
  Eigen::MatrixXd m(5, 5);
  auto it = v.begin();
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) m(i, j) = *it++;
  }
  return m;
}

inline Eigen::VectorXd vec5(double a, double b, double c, double d, double e) {
  Eigen::VectorXd v(5);
  v << a, b, c, d, e;
  return v;
}

}  // namespace detail

/// Two groups (75 and 100 rows), p = 5, generated in covariance form.
/// Noise standard deviations are 2 and 4, i.e. variances 4 and 16.
inline SimSpec example1_spec(std::uint64_t seed) {
  using detail::mat5;
  using detail::vec5;
  SimSpec spec;
  spec.seed = seed;
  spec.groups.push_back(
      {75, vec5(14, 18, 25, 14, 22), 4.50, vec5(0.47, 0.02, 0.42, 0.03, 0.87), 4.0,
       CovarianceForm{mat5({103.36, 103.07, 101.37, 79.41, 105.66,  //
                            103.08, 119.39, 110.23, 85.97, 115.47,  //
                            101.37, 110.23, 129.77, 106.08, 118.50,  //
                            79.41, 85.97, 106.08, 101.46, 95.21,  //
                            105.66, 115.47, 118.50, 95.21, 121.63})}});
  spec.groups.push_back(
      {100, vec5(-12, -10, -22, -20, -22), -4.20, vec5(-0.02, -0.63, -0.05, -0.85, -0.03),
       16.0,
       CovarianceForm{mat5({34.25, 15.16, 17.81, 22.39, 14.62,  //
                            15.16, 17.01, 11.42, 13.98, 8.95,  //
                            17.81, 11.42, 17.62, 16.12, 10.45,  //
                            22.39, 13.98, 16.12, 28.11, 13.11,  //
                            14.62, 8.95, 10.45, 13.11, 10.19})}});
  return spec;
}

/// Three groups (75, 100 and 60 rows), p = 5, noise standard deviation 2 in
/// every group.
inline SimSpec example2_spec(std::uint64_t seed) {
  using detail::mat5;
  using detail::vec5;
  SimSpec spec;
  spec.seed = seed;
  spec.groups.push_back(
      {75, vec5(0, 0, -5, 0, -4), 30.0, vec5(-0.41, -0.87, -0.22, -0.62, -0.06), 4.0,
       CovarianceForm{mat5({10.41, 3.61, 4.07, 4.48, 5.71,  //
                            3.61, 7.83, 2.88, 3.18, 4.03,  //
                            4.07, 2.88, 8.67, 3.81, 4.64,  //
                            4.48, 3.18, 3.81, 9.61, 5.17,  //
                            5.71, 4.04, 4.64, 5.17, 11.73})}});
  spec.groups.push_back(
      {100, vec5(14, 18, 25, 14, 22), 4.50, vec5(0.47, 0.02, 0.42, 0.03, 0.87), 4.0,
       CovarianceForm{mat5({103.36, 103.07, 101.37, 79.41, 105.66,  //
                            103.08, 122.1, 110.23, 85.97, 115.47,  //
                            101.37, 110.23, 134.33, 106.08, 118.50,  //
                            79.41, 85.97, 106.08, 102.73, 95.21,  //
                            105.66, 115.47, 118.50, 95.21, 129.21})}});
  spec.groups.push_back(
      {60, vec5(-12, -10, -22, -20, -22), -4.20, vec5(-0.02, -0.63, -0.05, -0.85, -0.03),
       4.0,
       CovarianceForm{mat5({25.19, 15.16, 17.81, 22.39, 14.62,  //
                            15.16, 10.67, 11.42, 13.98, 8.95,  //
                            17.81, 11.42, 13.12, 16.12, 10.45,  //
                            22.39, 13.98, 16.12, 20.31, 13.11,  //
                            14.62, 8.95, 10.45, 13.11, 8.70})}});
  return spec;
}

}  // namespace cwfa
