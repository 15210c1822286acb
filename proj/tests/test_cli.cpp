#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "nflow/network.hpp"
#include "nflow/serialize.hpp"

namespace nflow {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("nflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(NFLOW_CLI) + " " + args + " >" + (dir_ / "stdout").string() + " 2>" +
                            (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }

  void write_linear_path(const std::string& name, const std::string& structure, double a) const {
    const ParamPath p(structure_from_string(structure),
                      {ParamSegment{1.0, Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.0}});
    write(name, io::save_path({p, ChannelKind::scalar(), ActivationFamily{a}}));
  }

  fs::path dir_;
};

TEST_F(CliTest, IntegrateLinearExample) {
  write_linear_path("path.json", "separation", 0.0);
  write("z0.csv", "c0\n1\n0.5\n");
  ASSERT_EQ(run("integrate --path " + path("path.json") + " --z0 " + path("z0.csv") + " --substeps 128 --out " +
                path("out.csv")),
            0)
      << read("stderr");
  std::istringstream is(read("out.csv"));
  std::string header;
  double a = 0, b = 0;
  is >> header >> a >> b;
  EXPECT_EQ(header, "c0");
  EXPECT_NEAR(a, std::exp(1.0), 1e-9);
  EXPECT_NEAR(b, 0.5 * std::exp(1.0), 1e-9);
  const std::string manifest = read("out.csv.manifest");
  EXPECT_NE(manifest.find("command=integrate\n"), std::string::npos);
  EXPECT_NE(manifest.find("substeps=128\n"), std::string::npos);
}

TEST_F(CliTest, IntegrateMissingInput) {
  EXPECT_NE(run("integrate --path " + path("nope.json") + " --z0 " + path("z0.csv") + " --out " + path("o.csv")), 0);
  EXPECT_FALSE(read("stderr").empty());
}

TEST_F(CliTest, IntegrateZeroSubstepsIsUsageError) {
  write_linear_path("path.json", "separation", 0.0);
  write("z0.csv", "c0\n1\n");
  EXPECT_EQ(run("integrate --path " + path("path.json") + " --z0 " + path("z0.csv") + " --substeps 0 --out " +
                path("o.csv")),
            2);
}

TEST_F(CliTest, IntegrateBadCsvIsDataError) {
  write_linear_path("path.json", "separation", 0.0);
  write("z0.csv", "c0\nabc\n");
  EXPECT_EQ(run("integrate --path " + path("path.json") + " --z0 " + path("z0.csv") + " --out " + path("o.csv")), 3);
}

TEST_F(CliTest, DiscretizeRoundTripsAndCountsLayers) {
  write_linear_path("path.json", "composition", 1.0);
  ASSERT_EQ(run("discretize --path " + path("path.json") + " --dt 0.1 --scheme euler --out " + path("model.json")), 0)
      << read("stderr");
  const Network net = load(read("model.json"));
  EXPECT_EQ(save(net), read("model.json"));
  EXPECT_EQ(net.layers().size(), 10u);
  EXPECT_NEAR(forward(net, Matrix::Ones(1, 1))(0, 0), std::pow(1.1, 10), 1e-12);
  EXPECT_NE(read("model.json.manifest").find("L=10\n"), std::string::npos);
}

TEST_F(CliTest, DiscretizeSchemeMismatchIsUsageError) {
  write_linear_path("path.json", "separation", 0.0);
  EXPECT_EQ(run("discretize --path " + path("path.json") + " --dt 0.1 --scheme euler --out " + path("m.json")), 2);
  write_linear_path("c.json", "composition", 0.0);
  EXPECT_EQ(run("discretize --path " + path("c.json") + " --dt 0.1 --scheme split --out " + path("m.json")), 2);
  EXPECT_EQ(run("discretize --path " + path("c.json") + " --dt 0.1 --scheme rk4 --out " + path("m.json")), 2);
}

TEST_F(CliTest, DiscretizeBadVersionIsDataError) {
  write_linear_path("path.json", "composition", 0.0);
  std::string text = read("path.json");
  auto j = io::parse(text);
  j["format_version"] = "2";
  write("path.json", io::dump(j));
  EXPECT_EQ(run("discretize --path " + path("path.json") + " --dt 0.1 --scheme euler --out " + path("m.json")), 3);
}

TEST_F(CliTest, VerifySuitesPass) {
  EXPECT_EQ(run("verify --suite core --seed 3 --out " + path("report.txt")), 0) << read("stdout");
  EXPECT_NE(read("report.txt").find("leaky_relu_identity"), std::string::npos);
  EXPECT_NE(read("report.txt").find("measured="), std::string::npos);
  EXPECT_NE(read("report.txt.manifest").find("passed=true"), std::string::npos);
  EXPECT_EQ(run("verify --suite bogus"), 2);
}

TEST_F(CliTest, TrainFromConfigIsReproducible) {
  write("train.json", R"({"target": "double", "samples": 21, "seed": 4, "out_dir": ")" + path("run") + R"(",
    "template": {"structure": "separation", "channels": 1, "segments": 1, "steps_per_segment": 2, "train_alpha": false},
    "optimizer": {"iterations": 200, "learning_rate": 0.05, "final_learning_rate": 0.001, "lbfgs_iterations": 100}})");
  ASSERT_EQ(run("train --config " + path("train.json")), 0) << read("stderr");
  const std::string first = read("run/model.json") + read("run/loss.csv") + read("run/run.manifest");
  EXPECT_NE(read("run/metrics.csv").find("eval_sup_error"), std::string::npos);
  EXPECT_FALSE(read("run/path.json").empty());
  ASSERT_EQ(run("train --config " + path("train.json")), 0);
  EXPECT_EQ(read("run/model.json") + read("run/loss.csv") + read("run/run.manifest"), first);
}

TEST_F(CliTest, TrainBadConfigIsDataError) {
  write("bad.json", "{\"target\": ");
  EXPECT_EQ(run("train --config " + path("bad.json")), 3);
  write("bad2.json", R"({"target": "nope", "out_dir": ")" + path("x") + R"("})");
  EXPECT_EQ(run("train --config " + path("bad2.json")), 3);
}

TEST_F(CliTest, TrainOperatorFromFiles) {
  // Identity pairs written in the function-file format.
  std::string fn = "n=8,h=0.125\n";
  for (int r = 0; r < 6; ++r) {
    for (int p = 0; p < 8; ++p) fn += (p ? "," : "") + std::to_string(std::cos(2 * M_PI * p / 8.0) * (r + 1) * 0.3);
    fn += "\n";
  }
  write("f.csv", fn);
  write("op.json", R"({"n": 8, "k": 3, "m": 3, "train_inputs": "f.csv", "train_outputs": "f.csv",
    "heldout_inputs": "f.csv", "heldout_outputs": "f.csv", "out_dir": ")" + path("op") + R"(",
    "template": {"structure": "separation", "channels": 3, "train_alpha": false},
    "optimizer": {"iterations": 100, "lbfgs_iterations": 200}})");
  ASSERT_EQ(run("train-operator --config " + path("op.json")), 0) << read("stderr");
  EXPECT_NE(read("op/metrics.csv").find("heldout_relative_l2"), std::string::npos);
  EXPECT_NE(read("op/run.manifest").find("data=files"), std::string::npos);
}

TEST_F(CliTest, ErrorTable) {
  write_linear_path("path.json", "separation", 0.0);
  write("z0.csv", "c0\n1\n");
  ASSERT_EQ(run("error-table --path " + path("path.json") + " --z0 " + path("z0.csv") +
                " --dt 0.1 0.05 0.025 --out " + path("t.csv")),
            0)
      << read("stderr");
  std::istringstream is(read("t.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "dt,max_shift,layers,sup_error,ratio");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, NoSubcommandIsUsageError) { EXPECT_EQ(run(""), 2); }

}  // namespace
}  // namespace nflow
