#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cwfa/aecm.hpp"
#include "cwfa/model.hpp"
#include "cwfa/selection.hpp"
#include "cwfa/simulate.hpp"

namespace cwfa::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Row-major nested arrays.
inline json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput("expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected a nested numeric array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
      throw InvalidInput("ragged matrix");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!r[static_cast<std::size_t>(k)].is_number()) throw InvalidInput("expected a number");
      m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

inline json params_to_json(const CWFAParams& params) {
  json j;
  j["format_version"] = kFormatVersion;
  j["code"] = params.code.str();
  j["p"] = params.p;
  j["q"] = params.q;
  j["G"] = params.G();
  json comps = json::array();
  for (const auto& c : params.components) {
    comps.push_back({{"weight", c.weight},
                     {"intercept", c.intercept},
                     {"slope", to_json(c.slope)},
                     {"noise_var", c.noise_var},
                     {"mean", to_json(c.mean)},
                     {"loadings", to_json(c.loadings)},
                     {"uniquenesses", to_json(c.uniquenesses)}});
  }
  j["components"] = std::move(comps);
  return j;
}

/// Accepts either a bare parameter object or a fit document with a "params"
/// member. The result is validated.
inline CWFAParams params_from_json(const json& doc) {
  const json& j = doc.contains("params") ? doc.at("params") : doc;
  try {
    if (j.value("format_version", kFormatVersion) != kFormatVersion) {
      throw InvalidInput("unsupported model format_version");
    }
    CWFAParams params;
    params.code = ConstraintCode::parse(j.at("code").get<std::string>());
    params.p = j.at("p").get<int>();
    params.q = j.at("q").get<int>();
    for (const auto& c : j.at("components")) {
      ComponentParams cp;
      cp.weight = c.at("weight").get<double>();
      cp.intercept = c.at("intercept").get<double>();
      cp.slope = vector_from_json(c.at("slope"));
      cp.noise_var = c.at("noise_var").get<double>();
      cp.mean = vector_from_json(c.at("mean"));
      cp.loadings = matrix_from_json(c.at("loadings"));
      cp.uniquenesses = vector_from_json(c.at("uniquenesses"));
      params.components.push_back(std::move(cp));
    }
    if (j.contains("G") && j.at("G").get<int>() != params.G()) {
      throw InvalidInput("G does not match the number of components");
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed model JSON: ") + e.what());
  } catch (const InvalidParameter& e) {
    throw InvalidInput(std::string("invalid model parameters: ") + e.what());
  }
}

/// Labels are written 1-based.
inline json labels_to_json(const Partition& labels) {
  json a = json::array();
  for (int l : labels) a.push_back(l + 1);
  return a;
}

inline json fit_to_json(const FitResult& fit) {
  json j;
  j["format_version"] = kFormatVersion;
  j["params"] = params_to_json(fit.params);
  j["loglik"] = fit.final_loglik;
  j["loglik_trace"] = fit.loglik_trace;
  j["eta"] = fit.eta;
  j["bic"] = fit.bic;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["inner_nonconverged"] = fit.inner_nonconverged;
  j["labels"] = labels_to_json(fit.map_labels);
  return j;
}

inline json search_to_json(const SearchResult& result) {
  json j;
  j["format_version"] = kFormatVersion;
  json entries = json::array();
  for (const auto& e : result.entries) {
    json r{{"code", e.code.str()}, {"G", e.G}, {"q", e.q}};
    if (e.ok()) {
      r["bic"] = e.bic;
      r["loglik"] = e.final_loglik;
      r["converged"] = e.converged;
      r["above_1pct_line"] = result.above_line(e);
    } else {
      r["failure"] = *e.failure_reason;
    }
    entries.push_back(std::move(r));
  }
  j["entries"] = std::move(entries);
  const auto& best = result.best_entry();
  j["best"] = {{"code", best.code.str()}, {"G", best.G}, {"q", best.q}, {"bic", best.bic}};
  j["one_percent_line"] = result.one_percent_line;
  return j;
}

inline json simspec_to_json(const SimSpec& spec) {
  json j;
  j["format_version"] = kFormatVersion;
  j["seed"] = spec.seed;
  json groups = json::array();
  for (const auto& g : spec.groups) {
    json r{{"size", g.size},
           {"mean", to_json(g.mean)},
           {"intercept", g.intercept},
           {"slope", to_json(g.slope)},
           {"noise_var", g.noise_var}};
    if (const auto* cov = std::get_if<CovarianceForm>(&g.covariance)) {
      r["sigma"] = to_json(cov->sigma);
    } else {
      const auto& f = std::get<FactorForm>(g.covariance);
      r["loadings"] = to_json(f.loadings);
      r["uniquenesses"] = to_json(f.uniquenesses);
    }
    groups.push_back(std::move(r));
  }
  j["groups"] = std::move(groups);
  return j;
}

/// Inverse of simspec_to_json; a group carries either "sigma" or
/// "loadings" + "uniquenesses".
inline SimSpec simspec_from_json(const json& j) {
  try {
    SimSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& g : j.at("groups")) {
      SimGroup grp;
      grp.size = g.at("size").get<int>();
      grp.mean = vector_from_json(g.at("mean"));
      grp.intercept = g.at("intercept").get<double>();
      grp.slope = vector_from_json(g.at("slope"));
      grp.noise_var = g.at("noise_var").get<double>();
      if (g.contains("sigma")) {
        grp.covariance = CovarianceForm{matrix_from_json(g.at("sigma"))};
      } else {
        grp.covariance = FactorForm{matrix_from_json(g.at("loadings")),
                                    vector_from_json(g.at("uniquenesses"))};
      }
      spec.groups.push_back(std::move(grp));
    }
    return spec;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed simulation spec: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("error writing " + path);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Splits one record; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == ".";
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& source = "input") {
  CsvTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_record(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InvalidInput(source + ": line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw InvalidInput(source + ": missing header row");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_csv(in, path);
}

struct CsvSchema {
  std::string y_col = "y";
  std::string label_col;                // empty: no label column
  std::vector<std::string> x_cols;      // empty: every other column
  std::vector<std::string> ignore_cols;  // dropped before choosing x
};

/// Builds a Dataset from a table. Labels are read 1-based; empty or NA cells
/// mean unlabeled. Non-numeric x/y cells are rejected with row and column.
inline Dataset dataset_from_table(const CsvTable& t, const CsvSchema& schema,
                                  const std::string& source = "input") {
  const int y_idx = t.column(schema.y_col);
  if (y_idx < 0) throw InvalidInput(source + ": no column named '" + schema.y_col + "'");
  int label_idx = -1;
  if (!schema.label_col.empty()) {
    label_idx = t.column(schema.label_col);
    if (label_idx < 0) {
      throw InvalidInput(source + ": no column named '" + schema.label_col + "'");
    }
  }
  std::vector<int> x_idx;
  if (!schema.x_cols.empty()) {
    for (const auto& name : schema.x_cols) {
      const int k = t.column(name);
      if (k < 0) throw InvalidInput(source + ": no column named '" + name + "'");
      x_idx.push_back(k);
    }
  } else {
    for (int k = 0; k < static_cast<int>(t.header.size()); ++k) {
      if (k == y_idx || k == label_idx) continue;
      if (std::find(schema.ignore_cols.begin(), schema.ignore_cols.end(), t.header[k]) !=
          schema.ignore_cols.end()) {
        continue;
      }
      x_idx.push_back(k);
    }
  }
  if (x_idx.empty()) throw InvalidInput(source + ": no covariate columns");
  if (t.rows.empty()) throw InvalidInput(source + ": no data rows");

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Dataset d;
  d.x.resize(n, static_cast<Eigen::Index>(x_idx.size()));
  d.y.resize(n);
  auto cell = [&](Eigen::Index i, int k) {
    const std::string& s = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    const auto v = detail::parse_number(s);
    if (!v || !std::isfinite(*v)) {
      throw InvalidInput(source + ": non-numeric value '" + s + "' at data row " +
                         std::to_string(i + 1) + ", column '" + t.header[k] + "'");
    }
    return *v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < x_idx.size(); ++c) {
      d.x(i, static_cast<Eigen::Index>(c)) = cell(i, x_idx[c]);
    }
    d.y(i) = cell(i, y_idx);
  }
  if (label_idx >= 0) {
    d.labels.assign(static_cast<std::size_t>(n), kUnlabeled);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string& s = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(label_idx)];
      if (detail::is_missing(s)) continue;
      const auto v = detail::parse_number(s);
      if (!v || *v != std::floor(*v) || *v < 1) {
        throw InvalidInput(source + ": label '" + s + "' at data row " + std::to_string(i + 1) +
                           " is not a positive integer");
      }
      d.labels[static_cast<std::size_t>(i)] = static_cast<int>(*v) - 1;
    }
  }
  return d;
}

inline Dataset read_dataset(const std::string& path, const CsvSchema& schema) {
  return dataset_from_table(read_csv_file(path), schema, path);
}

/// Writes x1..xp, y and, when labels is non-empty, a 1-based label column
/// (empty cells for unlabeled rows). Values use shortest round-trip form.
inline std::string dataset_to_csv(const Dataset& d, const Partition& labels = {},
                                  const std::string& label_name = "label") {
  std::ostringstream os;
  os.precision(17);
  for (int j = 0; j < d.p(); ++j) os << 'x' << (j + 1) << ',';
  os << 'y';
  if (!labels.empty()) os << ',' << label_name;
  os << '\n';
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) os << json(d.x(i, j)).dump() << ',';
    os << json(d.y(i)).dump();
    if (!labels.empty()) {
      os << ',';
      if (labels[static_cast<std::size_t>(i)] != kUnlabeled) {
        os << labels[static_cast<std::size_t>(i)] + 1;
      }
    }
    os << '\n';
  }
  return os.str();
}

/// Reads a label vector (0-based in memory) from a CSV column or from a JSON
/// document's "labels" array. Files ending in .json are treated as JSON.
inline Partition read_labels(const std::string& path, const std::string& column = "label") {
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  Partition out;
  if (is_json) {
    const json j = read_json_file(path);
    if (!j.contains("labels") || !j.at("labels").is_array()) {
      throw InvalidInput(path + ": no \"labels\" array");
    }
    for (const auto& v : j.at("labels")) {
      if (!v.is_number_integer()) throw InvalidInput(path + ": labels must be integers");
      out.push_back(v.get<int>() - 1);
    }
    return out;
  }
  const CsvTable t = read_csv_file(path);
  const int k = t.column(column);
  if (k < 0) throw InvalidInput(path + ": no column named '" + column + "'");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto v = detail::parse_number(t.rows[i][static_cast<std::size_t>(k)]);
    if (!v || *v != std::floor(*v)) {
      throw InvalidInput(path + ": label at data row " + std::to_string(i + 1) +
                         " is not an integer");
    }
    out.push_back(static_cast<int>(*v) - 1);
  }
  return out;
}

/// Flury's vole skull data layout: Species, Age (the response) and the six
/// measurements L2, L9, L7, B3, B4, H1. Species are numbered in order of
/// first appearance.
struct VolesData {
  Dataset data;
  Partition species;  // 0-based
  std::vector<std::string> species_names;
};

inline VolesData load_voles(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  const int sp = t.column("Species");
  if (sp < 0) throw InvalidInput(path + ": no Species column");
  CsvSchema schema;
  schema.y_col = "Age";
  schema.x_cols = {"L2", "L9", "L7", "B3", "B4", "H1"};
  VolesData out;
  out.data = dataset_from_table(t, schema, path);
  for (const auto& row : t.rows) {
    const std::string& name = row[static_cast<std::size_t>(sp)];
    auto it = std::find(out.species_names.begin(), out.species_names.end(), name);
    if (it == out.species_names.end()) {
      out.species_names.push_back(name);
      it = out.species_names.end() - 1;
    }
    out.species.push_back(static_cast<int>(it - out.species_names.begin()));
  }
  return out;
}

}  // namespace cwfa::io
