#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cwfa/aecm.hpp"
#include "cwfa/init.hpp"
#include "cwfa/model.hpp"

namespace cwfa {

/// Hubert-Arabie adjusted Rand index between two labelings of the same rows.
/// Label values are arbitrary integers. Pair counts are accumulated exactly in
/// 64-bit integers. When the chance-corrected denominator vanishes (both
/// partitions trivial) the index is 1 for identical partitions and 0 otherwise.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InvalidInput("label vectors differ in length");
  if (a.size() < 2) throw InvalidInput("ARI needs at least two observations");

  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> rows;
  std::map<int, std::int64_t> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  auto pairs = [](std::int64_t m) { return m * (m - 1) / 2; };
  std::int64_t index = 0;
  for (const auto& [key, m] : cells) index += pairs(m);
  std::int64_t sum_rows = 0;
  for (const auto& [key, m] : rows) sum_rows += pairs(m);
  std::int64_t sum_cols = 0;
  for (const auto& [key, m] : cols) sum_cols += pairs(m);
  const auto total = pairs(static_cast<std::int64_t>(a.size()));

  const double expected = double(sum_rows) * double(sum_cols) / double(total);
  const double max_index = 0.5 * double(sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) {
    return (sum_rows == index && sum_cols == index) ? 1.0 : 0.0;
  }
  return (double(index) - expected) / denom;
}

struct SearchEntry {
  ConstraintCode code;
  int G = 0;
  int q = 0;
  double bic = 0.0;
  double final_loglik = 0.0;
  bool converged = false;
  std::optional<std::string> failure_reason;
  std::optional<FitResult> fit;  // absent for failed entries

  bool ok() const { return !failure_reason.has_value(); }
};

struct SearchResult {
  std::vector<SearchEntry> entries;  // grid order: G, then q, then code
  std::size_t best = 0;
  double one_percent_line = 0.0;

  const SearchEntry& best_entry() const { return entries.at(best); }

  /// A model is above the line iff |best_bic - bic| <= 0.01 |best_bic|.
  bool above_line(const SearchEntry& e) const {
    if (!e.ok()) return false;
    const double top = entries.at(best).bic;
    return std::abs(top - e.bic) <= 0.01 * std::abs(top);
  }
};

struct SearchOptions {
  int restarts = 10;  // k-means starts per (G, q) cell
  int jobs = 1;       // concurrent (G, q) cells
};

namespace detail {

inline std::vector<SearchEntry> search_cell(const Dataset& data, int G, int q,
                                            const std::vector<ConstraintCode>& codes,
                                            const FitConfig& config,
                                            const SearchOptions& options) {
  std::vector<SearchEntry> out;
  auto fail_all = [&](const std::string& why) {
    for (const auto& code : codes) {
      SearchEntry e;
      e.code = code;
      e.G = G;
      e.q = q;
      e.failure_reason = why;
      out.push_back(std::move(e));
    }
  };
  FamilyFit family;
  try {
    const Partition base = kmeans_partition(data, G, options.restarts, config.seed);
    family = hierarchical_fit_family(data, G, q, base, config, codes);
  } catch (const Error& e) {
    fail_all(e.what());
    return out;
  }
  for (const auto& code : codes) {
    SearchEntry e;
    e.code = code;
    e.G = G;
    e.q = q;
    const FamilyEntry& fe = family.at(code.str());
    if (fe.result) {
      e.bic = fe.result->bic;
      e.final_loglik = fe.result->final_loglik;
      e.converged = fe.result->converged;
      e.fit = fe.result;
    } else {
      e.failure_reason = fe.failure;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace detail

/// Fits every requested code for every (G, q) cell: k-means start, then the
/// hierarchical family. Cells may run concurrently; the entry order is fixed
/// regardless. The best entry is the highest BIC among converged fits (any
/// successful fit if none converged).
inline SearchResult grid_search(const Dataset& data, const std::vector<int>& G_set,
                                const std::vector<int>& q_set,
                                const std::vector<ConstraintCode>& codes,
                                const FitConfig& config = {},
                                const SearchOptions& options = {}) {
  data.validate();
  config.validate();
  if (G_set.empty() || q_set.empty() || codes.empty()) {
    throw InvalidInput("grid search needs at least one G, q and code");
  }
  for (int q : q_set) {
    if (q < 1 || q > data.p()) throw InvalidInput("every q must satisfy 1 <= q <= p");
  }
  for (int G : G_set) {
    if (G < 1) throw InvalidInput("every G must be >= 1");
  }

  std::vector<std::pair<int, int>> cells;
  for (int G : G_set) {
    for (int q : q_set) cells.emplace_back(G, q);
  }

  std::vector<std::vector<SearchEntry>> per_cell(cells.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, options.jobs));
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      per_cell[c] = detail::search_cell(data, cells[c].first, cells[c].second, codes,
                                        config, options);
    }
  } else {
    for (std::size_t start = 0; start < cells.size(); start += jobs) {
      std::vector<std::future<std::vector<SearchEntry>>> batch;
      const std::size_t stop = std::min(cells.size(), start + jobs);
      for (std::size_t c = start; c < stop; ++c) {
        batch.push_back(std::async(std::launch::async, [&, c] {
          return detail::search_cell(data, cells[c].first, cells[c].second, codes, config,
                                     options);
        }));
      }
      for (std::size_t c = start; c < stop; ++c) per_cell[c] = batch[c - start].get();
    }
  }

  SearchResult result;
  for (auto& cell : per_cell) {
    for (auto& e : cell) result.entries.push_back(std::move(e));
  }

  std::optional<std::size_t> best;
  for (int pass = 0; pass < 2 && !best; ++pass) {
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
      const auto& e = result.entries[i];
      if (!e.ok() || (pass == 0 && !e.converged)) continue;
      if (!best || e.bic > result.entries[*best].bic) best = i;
    }
  }
  if (!best) throw SearchFailed("every fit in the grid failed");
  result.best = *best;
  const double top = result.entries[*best].bic;
  result.one_percent_line = top - 0.01 * std::abs(top);
  return result;
}

struct ReportRow {
  int rank = 0;  // 1 = lowest BIC
  std::string code;
  int G = 0;
  int q = 0;
  double bic = 0.0;
  bool above_line = false;
  bool failed = false;
};

/// Entries sorted by increasing BIC (group-factor plot order); failed fits
/// trail with failed = true.
inline std::vector<ReportRow> group_factor_report(const SearchResult& result) {
  if (result.entries.empty()) throw InvalidInput("empty search result");
  std::vector<std::size_t> order(result.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = result.entries[a];
    const auto& eb = result.entries[b];
    if (ea.ok() != eb.ok()) return ea.ok();
    if (!ea.ok()) return false;
    return ea.bic < eb.bic;
  });
  std::vector<ReportRow> rows;
  int rank = 0;
  for (std::size_t i : order) {
    const auto& e = result.entries[i];
    ReportRow r;
    r.rank = ++rank;
    r.code = e.code.str();
    r.G = e.G;
    r.q = e.q;
    r.bic = e.ok() ? e.bic : std::nan("");
    r.above_line = result.above_line(e);
    r.failed = !e.ok();
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Plain-text rendering of the report, one line per model after a header.
inline std::string render_report(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "rank\tcode\tG\tq\tbic\tabove_1pct\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << r.rank << '\t' << r.code << '\t' << r.G << '\t' << r.q << '\t';
    if (r.failed) {
      os << "failed";
    } else {
      os << r.bic;
    }
    os << '\t' << (r.above_line ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace cwfa
