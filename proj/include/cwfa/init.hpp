#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cwfa/aecm.hpp"
#include "cwfa/constraint.hpp"
#include "cwfa/eigen_init.hpp"
#include "cwfa/model.hpp"

namespace cwfa {

// ---------------------------------------------------------------------------
// Initialization lattice

/// The sixteen codes arranged by number of relaxed constraints, with the
/// parent -> child edges used to warm-start the hierarchy. Every edge relaxes
/// exactly one constraint (one C becomes U).
struct Lattice {
  std::array<std::vector<ConstraintCode>, 5> levels;
  std::vector<std::pair<ConstraintCode, ConstraintCode>> edges;

  static const Lattice& standard() {
    static const Lattice lattice = build();
    return lattice;
  }

  std::vector<ConstraintCode> parents(const ConstraintCode& child) const {
    std::vector<ConstraintCode> out;
    for (const auto& [from, to] : edges) {
      if (to == child) out.push_back(from);
    }
    return out;
  }

  std::vector<ConstraintCode> children(const ConstraintCode& parent) const {
    std::vector<ConstraintCode> out;
    for (const auto& [from, to] : edges) {
      if (from == parent) out.push_back(to);
    }
    return out;
  }

 private:
  static Lattice build() {
    Lattice l;
    l.levels[0] = {ConstraintCode::parse("CCCC")};
    l.levels[1] = {ConstraintCode::parse("CCCU"), ConstraintCode::parse("CCUC"),
                   ConstraintCode::parse("CUCC"), ConstraintCode::parse("UCCC")};
    l.levels[2] = {ConstraintCode::parse("CCUU"), ConstraintCode::parse("CUCU"),
                   ConstraintCode::parse("UCCU"), ConstraintCode::parse("CUUC"),
                   ConstraintCode::parse("UCUC"), ConstraintCode::parse("UUCC")};
    l.levels[3] = {ConstraintCode::parse("CUUU"), ConstraintCode::parse("UCUU"),
                   ConstraintCode::parse("UUCU"), ConstraintCode::parse("UUUC")};
    l.levels[4] = {ConstraintCode::parse("UUUU")};
    static constexpr std::array<std::pair<const char*, const char*>, 32> kEdges{{
        {"CCCC", "CCCU"}, {"CCCC", "CCUC"}, {"CCCC", "CUCC"}, {"CCCC", "UCCC"},
        {"CCCU", "CCUU"}, {"CCCU", "CUCU"}, {"CCCU", "UCCU"},
        {"CCUC", "UCUC"}, {"CCUC", "CUUC"}, {"CCUC", "CCUU"},
        {"CUCC", "UUCC"}, {"CUCC", "CUUC"}, {"CUCC", "CUCU"},
        {"UCCC", "UUCC"}, {"UCCC", "UCUC"}, {"UCCC", "UCCU"},
        {"CCUU", "UCUU"}, {"CCUU", "CUUU"},
        {"CUCU", "UUCU"}, {"CUCU", "CUUU"},
        {"CUUC", "UUUC"}, {"CUUC", "CUUU"},
        {"UUCC", "UUUC"}, {"UUCC", "UUCU"},
        {"UCUC", "UUUC"}, {"UCUC", "UCUU"},
        {"UCCU", "UCUU"}, {"UCCU", "UUCU"},
        {"CUUU", "UUUU"}, {"UCUU", "UUUU"}, {"UUCU", "UUUU"}, {"UUUC", "UUUU"},
    }};
    for (const auto& [from, to] : kEdges) {
      l.edges.emplace_back(ConstraintCode::parse(from), ConstraintCode::parse(to));
    }
    return l;
  }
};

// ---------------------------------------------------------------------------
// Hard partitions

namespace detail {

inline double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i,
                               const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

struct KMeansRun {
  Partition assignment;
  double within_ss = std::numeric_limits<double>::infinity();
};

/// Lloyd iterations from a k-means++ seeding.
inline KMeansRun lloyd(const Eigen::MatrixXd& pts, int k, std::mt19937_64& rng,
                       int max_iter = 100) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd centers(k, pts.cols());

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = pts.row(pick(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = squared_distance(pts, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        target -= d2(chosen);
        if (target <= 0.0 && d2(chosen) > 0.0) break;
      }
    }
    centers.row(c) = pts.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), squared_distance(pts, i, centers, c));
    }
  }

  KMeansRun run;
  run.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(pts, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(pts, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.assignment[i] != best) {
        run.assignment[i] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.assignment[i]) += pts.row(i);
      counts(run.assignment[i]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        centers.row(c) = sums.row(c) / counts(c);
        continue;
      }
      // Empty cluster: move its center onto the point farthest from its own.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = squared_distance(pts, i, centers, run.assignment[i]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(c) = pts.row(far);
      run.assignment[far] = c;
      changed = true;
    }
    if (!changed) break;
  }
  run.within_ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.within_ss += squared_distance(pts, i, centers, run.assignment[i]);
  }
  return run;
}

inline std::size_t distinct_rows(const Eigen::MatrixXd& m) {
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.insert(std::move(r));
  }
  return rows.size();
}

}  // namespace detail

/// k-means on the column-standardized joint vector (x', y)', best of
/// `restarts` seeded k-means++ starts by within-cluster sum of squares.
/// Labeled rows are overridden with their labels afterwards.
inline Partition kmeans_partition(const Dataset& data, int G, int restarts = 10,
                                  std::uint64_t seed = 0) {
  data.validate();
  if (G < 1) throw InvalidInput("G must be >= 1");
  if (restarts < 1) throw InvalidInput("restarts must be >= 1");
  const int n = data.n();
  if (n < G) throw InvalidInput("fewer rows than components");

  Eigen::MatrixXd joint(n, data.p() + 1);
  joint << data.x, data.y;
  for (Eigen::Index j = 0; j < joint.cols(); ++j) {
    const double mean = joint.col(j).mean();
    const double sd = std::sqrt((joint.col(j).array() - mean).square().mean());
    joint.col(j).array() -= mean;
    if (sd > 0.0) joint.col(j) /= sd;
  }
  if (detail::distinct_rows(joint) < static_cast<std::size_t>(G)) {
    throw InvalidInput("G exceeds the number of distinct rows");
  }

  Partition best;
  if (G == 1) {
    best.assign(static_cast<std::size_t>(n), 0);
  } else {
    std::mt19937_64 rng(seed);
    double best_ss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
      auto run = detail::lloyd(joint, G, rng);
      if (run.within_ss < best_ss) {
        best_ss = run.within_ss;
        best = std::move(run.assignment);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (data.is_labeled(i)) best[static_cast<std::size_t>(i)] = data.labels[i];
  }
  return best;
}

/// Uniform multinomial assignment, redrawn until no group is empty.
inline Partition random_partition(int n, int G, std::uint64_t seed) {
  if (G < 1) throw InvalidInput("G must be >= 1");
  if (n < G) throw InvalidInput("fewer rows than components");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, G - 1);
  Partition part(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> sizes(static_cast<std::size_t>(G), 0);
    for (auto& v : part) {
      v = pick(rng);
      ++sizes[static_cast<std::size_t>(v)];
    }
    if (std::find(sizes.begin(), sizes.end(), 0) == sizes.end()) return part;
  }
  throw InvalidInput("could not draw a partition with every group nonempty");
}

// ---------------------------------------------------------------------------
// Hierarchical family fit

struct FamilyEntry {
  ConstraintCode code;
  std::optional<FitResult> result;
  std::string failure;                      // empty on success
  std::optional<ConstraintCode> init_from;  // parent used for the warm start
};

/// Result of fitting the lattice, keyed by code string.
using FamilyFit = std::map<std::string, FamilyEntry>;

/// Fits CCCC from `base_partition`, then every other code in lattice order,
/// starting each from the fitted parameters of its best-likelihood parent
/// (ties go to the lexicographically smaller code). The parent's estimates
/// satisfy the child's weaker constraints, and its MAP partition is the
/// child's starting classification. Failed fits are recorded; a child whose
/// parents all failed starts from `base_partition`.
///
/// `wanted`, when non-empty, restricts fitting to those codes and their
/// ancestors.
inline FamilyFit hierarchical_fit_family(const Dataset& data, int G, int q,
                                         const Partition& base_partition,
                                         const FitConfig& config = {},
                                         const std::vector<ConstraintCode>& wanted = {}) {
  const Lattice& lattice = Lattice::standard();

  std::set<std::string> needed;
  if (wanted.empty()) {
    for (const auto& c : ConstraintCode::all()) needed.insert(c.str());
  } else {
    std::vector<ConstraintCode> stack = wanted;
    while (!stack.empty()) {
      const ConstraintCode c = stack.back();
      stack.pop_back();
      if (!needed.insert(c.str()).second) continue;
      for (const auto& parent : lattice.parents(c)) stack.push_back(parent);
    }
  }

  FamilyFit family;
  for (const auto& level : lattice.levels) {
    for (const auto& code : level) {
      if (!needed.contains(code.str())) continue;
      FamilyEntry entry;
      entry.code = code;

      const FamilyEntry* best_parent = nullptr;
      for (const auto& parent : lattice.parents(code)) {
        const auto it = family.find(parent.str());
        if (it == family.end() || !it->second.result) continue;
        const FamilyEntry& cand = it->second;
        if (best_parent == nullptr ||
            cand.result->final_loglik > best_parent->result->final_loglik ||
            (cand.result->final_loglik == best_parent->result->final_loglik &&
             cand.code.str() < best_parent->code.str())) {
          best_parent = &cand;
        }
      }

      try {
        if (best_parent != nullptr) {
          CWFAParams start = best_parent->result->params;
          start.code = code;
          entry.init_from = best_parent->code;
          entry.result = fit_from(data, start, config);
        } else {
          entry.result = fit(data, code, G, q, base_partition, config);
        }
      } catch (const Error& e) {
        if (code.constraint_count() == 4) {
          throw FamilyInitError(std::string("CCCC fit failed: ") + e.what());
        }
        entry.failure = e.what();
      }
      family.emplace(code.str(), std::move(entry));
    }
  }
  return family;
}

}  // namespace cwfa
