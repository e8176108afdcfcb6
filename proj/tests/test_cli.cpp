#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cwfa/cwfa.hpp"

namespace fs = std::filesystem;
using cwfa::io::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI in a scratch directory, capturing stdout and stderr.
Run run(const std::string& args) {
  const std::string cmd = std::string(CWFA_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cwfa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesRowsAndIsDeterministic) {
  ASSERT_EQ(run("simulate --spec example1 --seed 7 -o " + path("a.csv") + " --truth " +
                path("a.json"))
                .status,
            0);
  ASSERT_EQ(run("simulate --spec example1 --seed 7 -o " + path("b.csv") + " --truth " +
                path("b.json"))
                .status,
            0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto d = cwfa::io::read_dataset(path("a.csv"), {});
  EXPECT_EQ(d.n(), 175);
  EXPECT_EQ(d.p(), 5);
  const json truth = json::parse(slurp(path("a.json")));
  EXPECT_EQ(truth["labels"].size(), 175u);

  ASSERT_EQ(run("simulate --spec example2 --seed 7 -o " + path("c.csv") + " --truth " +
                path("c.json"))
                .status,
            0);
  EXPECT_EQ(cwfa::io::read_dataset(path("c.csv"), {}).n(), 235);

  EXPECT_EQ(run("simulate --spec nope.json -o " + path("x.csv")).status, 2);
  EXPECT_EQ(run("simulate").status, 2);
}

TEST_F(Cli, SearchReportsBestAndFullReport) {
  ASSERT_EQ(run("simulate --spec example1 --seed 11 -o " + path("d.csv") + " --truth " +
                path("t.json"))
                .status,
            0);
  const auto r = run("search -i " + path("d.csv") + " --G 2,3 --q 1,2 -o " + path("best.json") +
                     " --leaderboard " + path("board.json") + " --report " + path("rep.txt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("best code=UUCU G=2 q=2"), std::string::npos) << r.out;
  const std::string report = slurp(path("rep.txt"));
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 65);
  const json board = json::parse(slurp(path("board.json")));
  EXPECT_EQ(board["entries"].size(), 64u);

  const auto a = run("ari " + path("best.json") + " " + path("t.json"));
  EXPECT_EQ(a.status, 0);
  EXPECT_EQ(a.out, "1.0000\n");

  const auto one = run("search -i " + path("d.csv") + " --G 2 --q 1 --codes CCCC -o " +
                       path("b1.json") + " --report " + path("r1.txt"));
  ASSERT_EQ(one.status, 0) << one.out;
  const std::string r1 = slurp(path("r1.txt"));
  EXPECT_EQ(std::count(r1.begin(), r1.end(), '\n'), 2);
}

TEST_F(Cli, FitAndWarmStart) {
  ASSERT_EQ(run("simulate --spec example2 --seed 5 -o " + path("d.csv") + " --truth " +
                path("t.json"))
                .status,
            0);
  const auto r = run("fit -i " + path("d.csv") + " --code CUUC --G 3 --q 2 -o " + path("m.json"));
  ASSERT_EQ(r.status, 0) << r.out;
  const json model = json::parse(slurp(path("m.json")));
  EXPECT_EQ(model["params"]["code"], "CUUC");
  EXPECT_GE(model["loglik_trace"].size(), 2u);
  EXPECT_EQ(run("ari " + path("m.json") + " " + path("t.json")).out, "1.0000\n");

  // The written parameters reload bit-identically.
  const auto params = cwfa::io::params_from_json(model);
  EXPECT_EQ(cwfa::io::params_to_json(params).dump(), model["params"].dump());

  const auto warm = run("fit -i " + path("d.csv") + " --warm-start " + path("m.json") + " -o " +
                        path("w.json"));
  ASSERT_EQ(warm.status, 0) << warm.out;
  const json w = json::parse(slurp(path("w.json")));
  EXPECT_GE(w["loglik"].get<double>(), model["loglik"].get<double>() - 1e-6);

  const auto relabel = run("fit -i " + path("d.csv") + " --code CUUC --G 3 --q 2 --init-labels " +
                           path("m.json") + " -o " + path("p.json"));
  ASSERT_EQ(relabel.status, 0) << relabel.out;
  EXPECT_GE(json::parse(slurp(path("p.json")))["loglik"].get<double>(),
            model["loglik"].get<double>() - 1e-6);

  const auto single = run("fit -i " + path("d.csv") + " --code UUUU --G 1 --q 1 -o " +
                          path("s.json"));
  EXPECT_EQ(single.status, 0) << single.out;

  EXPECT_EQ(run("fit -i " + path("d.csv") + " --code XXXX --G 2 --q 1").status, 2);
  EXPECT_EQ(run("fit -i " + path("d.csv") + " --code UUUU --G 2 --q 9").status, 2);
  EXPECT_EQ(run("fit -i " + path("missing.csv") + " --code UUUU --G 2 --q 1").status, 2);
  EXPECT_EQ(run("fit -i " + path("d.csv") + " --code UUUU --G 200 --q 1 -o " + path("z.json"))
                .status,
            3);
}

TEST_F(Cli, ClassifyEchoesGivenLabels) {
  ASSERT_EQ(run("simulate --spec example1 --seed 3 --with-labels -o " + path("d.csv") +
                " --truth " + path("t.json"))
                .status,
            0);
  const auto r = run("classify -i " + path("d.csv") + " --G 2 --q 1,2 --labels-out " +
                     path("l.csv") + " -o " + path("m.json"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(run("ari " + path("l.csv") + " " + path("d.csv")).out, "1.0000\n");
  const auto given = cwfa::io::read_labels(path("d.csv"));
  EXPECT_EQ(cwfa::io::read_labels(path("l.csv")), given);

  // Deterministic under a fixed seed.
  ASSERT_EQ(run("classify -i " + path("d.csv") + " --G 2 --q 1,2 --labels-out " +
                path("l2.csv") + " -o " + path("m2.json"))
                .status,
            0);
  EXPECT_EQ(slurp(path("l.csv")), slurp(path("l2.csv")));
  EXPECT_EQ(slurp(path("m.json")), slurp(path("m2.json")));

  EXPECT_EQ(run("classify -i " + path("d.csv") + " --G 1 --labels-out " + path("l3.csv")).status,
            2);
}

TEST_F(Cli, AriCases) {
  cwfa::io::write_text_file(path("a.csv"), "label\n1\n1\n2\n2\n");
  cwfa::io::write_text_file(path("b.csv"), "label\n2\n2\n1\n1\n");
  cwfa::io::write_text_file(path("c.csv"), "label\n1\n1\n1\n1\n");
  cwfa::io::write_text_file(path("d.csv"), "label\n1\n1\n2\n");
  EXPECT_EQ(run("ari " + path("a.csv") + " " + path("b.csv")).out, "1.0000\n");
  EXPECT_EQ(run("ari " + path("a.csv") + " " + path("c.csv")).out, "0.0000\n");
  EXPECT_EQ(run("ari " + path("a.csv") + " " + path("d.csv")).status, 2);

  std::string species = "label\n";
  std::string clusters = "label\n";
  auto add = [&](int s, int c, int k) {
    for (int i = 0; i < k; ++i) {
      species += std::to_string(s) + "\n";
      clusters += std::to_string(c) + "\n";
    }
  };
  add(1, 1, 24);
  add(1, 2, 21);
  add(2, 3, 41);
  cwfa::io::write_text_file(path("s.csv"), species);
  cwfa::io::write_text_file(path("k.csv"), clusters);
  EXPECT_EQ(run("ari " + path("s.csv") + " " + path("k.csv")).out, "0.7235\n");
}
