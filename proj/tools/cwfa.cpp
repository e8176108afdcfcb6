// Command-line front end for the CWFA model family.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cwfa/cwfa.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCompute = 3;

using cwfa::ConstraintCode;
using cwfa::io::json;

std::vector<ConstraintCode> parse_codes(const std::string& text) {
  std::vector<ConstraintCode> out;
  if (text == "all") {
    const auto all = ConstraintCode::all();
    return {all.begin(), all.end()};
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(ConstraintCode::parse(item));
  }
  if (out.empty()) throw cwfa::InvalidInput("no constraint codes given");
  return out;
}

struct DataOptions {
  std::string input;
  std::string y_col = "y";
  std::string label_col;
  std::vector<std::string> ignore;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("-i,--input", d.input, "CSV file with a header row")->required();
  cmd->add_option("--y-col", d.y_col, "response column")->capture_default_str();
  cmd->add_option("--label-col", d.label_col, "column of known 1-based labels");
  cmd->add_option("--ignore", d.ignore, "columns to leave out of the covariates");
}

cwfa::Dataset load(const DataOptions& d) {
  cwfa::io::CsvSchema schema;
  schema.y_col = d.y_col;
  schema.label_col = d.label_col;
  schema.ignore_cols = d.ignore;
  return cwfa::io::read_dataset(d.input, schema);
}

struct FitOptions {
  double epsilon = 0.05;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  int restarts = 10;
};

void add_fit_options(CLI::App* cmd, FitOptions& f) {
  cmd->add_option("--epsilon", f.epsilon, "Aitken stopping tolerance")->capture_default_str();
  cmd->add_option("--max-iters", f.max_iters, "outer iteration cap")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--restarts", f.restarts, "k-means restarts")->capture_default_str();
}

cwfa::FitConfig to_config(const FitOptions& f) {
  cwfa::FitConfig c;
  c.epsilon = f.epsilon;
  c.max_outer_iters = f.max_iters;
  c.seed = f.seed;
  c.validate();
  return c;
}

void write_json(const std::string& path, const json& j) {
  cwfa::io::write_text_file(path, j.dump(2) + "\n");
}

void check_label_range(const cwfa::Dataset& data, const std::vector<int>& G_set) {
  const int g_min = *std::min_element(G_set.begin(), G_set.end());
  data.validate_labels(g_min);
}

std::string labels_csv(const cwfa::Partition& labels, const cwfa::Dataset& data) {
  std::ostringstream os;
  os << "row,label,given\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << i + 1 << ',' << labels[i] + 1 << ',' << (data.is_labeled(static_cast<int>(i)) ? 1 : 0)
       << '\n';
  }
  return os.str();
}

void print_fit(const cwfa::FitResult& f) {
  std::cout << std::setprecision(10) << "code=" << f.params.code.str() << " G=" << f.params.G()
            << " q=" << f.params.q << " loglik=" << f.final_loglik << " bic=" << f.bic
            << " iterations=" << f.iterations << " converged=" << (f.converged ? 1 : 0) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parsimonious cluster-weighted factor analyzers"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset from a built-in or JSON spec");
  std::string sim_spec;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  std::string sim_out = "data.csv";
  std::string sim_truth = "truth.json";
  bool sim_labels = false;
  sim->add_option("--spec", sim_spec, "example1, example2 or a spec JSON file")->required();
  sim->add_option("--seed", sim_seed, "random seed")->each([&](const std::string&) {
    sim_seed_set = true;
  });
  sim->add_option("-o,--out", sim_out, "dataset CSV")->capture_default_str();
  sim->add_option("--truth", sim_truth, "truth JSON")->capture_default_str();
  sim->add_flag("--with-labels", sim_labels, "add the true label column to the CSV");

  // search
  auto* search = app.add_subcommand("search", "BIC search over G, q and constraint codes");
  DataOptions s_data;
  FitOptions s_fit;
  std::vector<int> s_G{2, 3};
  std::vector<int> s_q{1, 2};
  std::string s_codes = "all";
  int s_jobs = 1;
  std::string s_out = "best.json";
  std::string s_board;
  std::string s_report;
  add_data_options(search, s_data);
  add_fit_options(search, s_fit);
  search->add_option("--G", s_G, "component counts")->delimiter(',')->capture_default_str();
  search->add_option("--q", s_q, "latent dimensions")->delimiter(',')->capture_default_str();
  search->add_option("--codes", s_codes, "'all' or comma-separated codes")->capture_default_str();
  search->add_option("--jobs", s_jobs, "concurrent (G, q) cells")->capture_default_str();
  search->add_option("-o,--out", s_out, "best model JSON")->capture_default_str();
  search->add_option("--leaderboard", s_board, "every fit, JSON");
  search->add_option("--report", s_report, "group-factor report, text");

  // fit
  auto* fitc = app.add_subcommand("fit", "fit one model");
  DataOptions f_data;
  FitOptions f_fit;
  std::string f_code;
  int f_G = 0;
  int f_q = 0;
  std::string f_init = "kmeans";
  std::string f_warm;
  std::string f_init_labels;
  std::string f_out = "model.json";
  add_data_options(fitc, f_data);
  add_fit_options(fitc, f_fit);
  fitc->add_option("--code", f_code, "constraint code, e.g. UUCU");
  fitc->add_option("--G", f_G, "number of components");
  fitc->add_option("--q", f_q, "number of latent factors");
  fitc->add_option("--init", f_init, "kmeans or random")
      ->check(CLI::IsMember({"kmeans", "random"}))
      ->capture_default_str();
  fitc->add_option("--warm-start", f_warm, "start from the parameters in a model JSON");
  fitc->add_option("--init-labels", f_init_labels,
                   "start from a 1-based partition (CSV 'label' column or JSON 'labels')");
  fitc->add_option("-o,--out", f_out, "model JSON")->capture_default_str();

  // classify
  auto* cls = app.add_subcommand("classify", "semi-supervised fit with partially known labels");
  DataOptions c_data;
  c_data.label_col = "label";
  FitOptions c_fit;
  std::vector<int> c_G;
  std::vector<int> c_q{1};
  std::string c_codes = "all";
  std::string c_labels_out = "labels.csv";
  std::string c_out = "model.json";
  add_data_options(cls, c_data);
  add_fit_options(cls, c_fit);
  cls->add_option("--G", c_G, "component counts")->delimiter(',')->required();
  cls->add_option("--q", c_q, "latent dimensions")->delimiter(',')->capture_default_str();
  cls->add_option("--codes", c_codes, "'all' or comma-separated codes")->capture_default_str();
  cls->add_option("--labels-out", c_labels_out, "predicted labels CSV")->capture_default_str();
  cls->add_option("-o,--out", c_out, "selected model JSON")->capture_default_str();

  // ari
  auto* ari = app.add_subcommand("ari", "adjusted Rand index between two labelings");
  std::string a_file;
  std::string b_file;
  std::string a_col = "label";
  std::string b_col = "label";
  ari->add_option("a", a_file, "first labeling (CSV or JSON)")->required();
  ari->add_option("b", b_file, "second labeling (CSV or JSON)")->required();
  ari->add_option("--col-a", a_col, "label column in the first CSV")->capture_default_str();
  ari->add_option("--col-b", b_col, "label column in the second CSV")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim) {
      cwfa::SimSpec spec;
      if (sim_spec == "example1") {
        spec = cwfa::example1_spec(sim_seed);
      } else if (sim_spec == "example2") {
        spec = cwfa::example2_spec(sim_seed);
      } else {
        spec = cwfa::io::simspec_from_json(cwfa::io::read_json_file(sim_spec));
        if (sim_seed_set) spec.seed = sim_seed;
      }
      const cwfa::SimulatedData out = cwfa::sample_dataset(spec);
      cwfa::io::write_text_file(
          sim_out, cwfa::io::dataset_to_csv(out.data, sim_labels ? out.truth : cwfa::Partition{}));
      json truth = cwfa::io::simspec_to_json(spec);
      truth["labels"] = cwfa::io::labels_to_json(out.truth);
      write_json(sim_truth, truth);
      std::cout << "wrote " << out.data.n() << " rows to " << sim_out << "\n";
    } else if (*search) {
      const cwfa::Dataset data = load(s_data);
      check_label_range(data, s_G);
      cwfa::SearchOptions opts;
      opts.restarts = s_fit.restarts;
      opts.jobs = s_jobs;
      const auto result =
          cwfa::grid_search(data, s_G, s_q, parse_codes(s_codes), to_config(s_fit), opts);
      write_json(s_out, cwfa::io::fit_to_json(*result.best_entry().fit));
      if (!s_board.empty()) write_json(s_board, cwfa::io::search_to_json(result));
      const std::string report = cwfa::render_report(cwfa::group_factor_report(result));
      if (!s_report.empty()) cwfa::io::write_text_file(s_report, report);
      const auto& b = result.best_entry();
      std::cout << std::setprecision(10) << "best code=" << b.code.str() << " G=" << b.G
                << " q=" << b.q << " bic=" << b.bic << "\n";
    } else if (*fitc) {
      const cwfa::Dataset data = load(f_data);
      const cwfa::FitConfig config = to_config(f_fit);
      cwfa::FitResult result;
      if (!f_warm.empty()) {
        cwfa::CWFAParams start = cwfa::io::params_from_json(cwfa::io::read_json_file(f_warm));
        if (!f_code.empty()) start.code = ConstraintCode::parse(f_code);
        if ((f_G != 0 && f_G != start.G()) || (f_q != 0 && f_q != start.q)) {
          throw cwfa::InvalidInput("--G/--q disagree with the warm-start model");
        }
        try {
          start.validate();
        } catch (const cwfa::InvalidParameter& e) {
          throw cwfa::InvalidInput(std::string("warm start violates the code: ") + e.what());
        }
        result = cwfa::fit_from(data, start, config);
      } else {
        if (f_code.empty() || f_G < 1 || f_q < 1) {
          throw cwfa::InvalidInput("fit needs --code, --G and --q (or --warm-start)");
        }
        cwfa::Partition init;
        if (!f_init_labels.empty()) {
          init = cwfa::io::read_labels(f_init_labels);
        } else if (f_init == "random") {
          init = cwfa::random_partition(data.n(), f_G, f_fit.seed);
          for (int i = 0; i < data.n(); ++i) {
            if (data.is_labeled(i)) init[static_cast<std::size_t>(i)] = data.labels[i];
          }
        } else {
          init = cwfa::kmeans_partition(data, f_G, f_fit.restarts, f_fit.seed);
        }
        result = cwfa::fit(data, ConstraintCode::parse(f_code), f_G, f_q, init, config);
      }
      write_json(f_out, cwfa::io::fit_to_json(result));
      print_fit(result);
    } else if (*cls) {
      const cwfa::Dataset data = load(c_data);
      check_label_range(data, c_G);
      cwfa::SearchOptions opts;
      opts.restarts = c_fit.restarts;
      const auto result =
          cwfa::grid_search(data, c_G, c_q, parse_codes(c_codes), to_config(c_fit), opts);
      const cwfa::FitResult& best = *result.best_entry().fit;
      write_json(c_out, cwfa::io::fit_to_json(best));
      cwfa::io::write_text_file(c_labels_out, labels_csv(best.map_labels, data));
      print_fit(best);
    } else if (*ari) {
      const cwfa::Partition a = cwfa::io::read_labels(a_file, a_col);
      const cwfa::Partition b = cwfa::io::read_labels(b_file, b_col);
      std::cout << std::fixed << std::setprecision(4) << cwfa::ari(a, b) << "\n";
    }
  } catch (const cwfa::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cwfa::InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cwfa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
  return kExitOk;
}
