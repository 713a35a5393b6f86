#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srnet/csv.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("srnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  static std::string read(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SRNET_CLI) + " " + args + " > " + path("stdout.txt").string() + " 2> " +
                            path("stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string k0_config(const std::string& name = "k0.conf") const {
    write(name,
          "benchmark = K0\nepochs = 200\n[evolve]\nlambda = 20\nmax_generations = 5\nrows = 4\ncols = 4\n");
    return path(name).string();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, MissingCsvIsDataError) {
  write("c.conf", "data = " + path("absent.csv").string() + "\nhidden = [2]\n");
  EXPECT_EQ(run("train --seed 1 --config " + path("c.conf").string() + " --out " + path("o").string()), 3);
  EXPECT_NE(read(path("stderr.txt")).find("absent.csv"), std::string::npos);
}

TEST_F(Cli, ConfigProblemsExitWithTwo) {
  EXPECT_EQ(run("train --config " + k0_config() + " --out " + path("o").string()), 2);  // no --seed
  write("bad.conf", "benchmark = K0\nepochs = many\n");
  EXPECT_EQ(run("train --seed 1 --config " + path("bad.conf").string() + " --out " + path("o").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, TrainSameSeedSameWeights) {
  const auto cfg = k0_config();
  ASSERT_EQ(run("train --seed 4 --config " + cfg + " --out " + path("a").string()), 0);
  ASSERT_EQ(run("train --seed 4 --config " + cfg + " --out " + path("b").string()), 0);
  EXPECT_EQ(read(path("a") / "weights.json"), read(path("b") / "weights.json"));
  EXPECT_TRUE(fs::exists(path("a") / "manifest.json"));
  EXPECT_TRUE(fs::exists(path("a") / "train_loss.csv"));
  EXPECT_NE(read(path("stdout.txt")).find("test loss"), std::string::npos);
}

TEST_F(Cli, ExplainEmitsRunArtifacts) {
  const auto cfg = k0_config();
  const auto out = path("o").string();
  ASSERT_EQ(run("train --seed 1 --config " + cfg + " --out " + out), 0);
  ASSERT_EQ(run("explain --seed 2 --runs 1 --config " + cfg + " --out " + out), 0) << read(path("stderr.txt"));
  for (const char* f : {"convergence.csv", "genotype.json", "report.txt"})
    EXPECT_TRUE(fs::exists(path("o") / "run0" / f)) << f;
  EXPECT_TRUE(fs::exists(path("o") / "summary.csv"));
  const auto log = read(path("o") / "run0" / "convergence.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "generation,best_total,mean_total,layer0_mse,layer1_mse,output_loss");
  EXPECT_NE(read(path("o") / "run0" / "report.txt").find("whole network:"), std::string::npos);

  ASSERT_EQ(run("report --config " + cfg + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(path("o") / "expressions.txt"));
  EXPECT_TRUE(fs::exists(path("o") / "layer2_activations.csv"));
}

TEST_F(Cli, ConvergenceLogsAreReproducibleAcrossThreads) {
  const auto cfg = k0_config();
  ASSERT_EQ(run("train --seed 1 --config " + cfg + " --out " + path("o").string()), 0);
  const auto weights = (path("o") / "weights.json").string();
  const auto data = (path("o") / "train.csv").string();
  for (const char* sub : {"x", "y", "z"}) {
    const std::string threads = std::string(sub) == "z" ? " --threads 3" : "";
    ASSERT_EQ(run("explain --seed 9 --runs 2 --config " + cfg + " --weights " + weights + " --data " + data + " --out " +
                  path(sub).string() + threads),
              0);
  }
  for (const char* run_dir : {"run0", "run1"}) {
    const auto a = read(path("x") / run_dir / "convergence.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, read(path("y") / run_dir / "convergence.csv"));
    EXPECT_EQ(a, read(path("z") / run_dir / "convergence.csv"));
    EXPECT_EQ(read(path("x") / run_dir / "genotype.json"), read(path("z") / run_dir / "genotype.json"));
  }
}

TEST_F(Cli, EvalExtrapolationSpansFiveTimes) {
  const auto cfg = k0_config();
  const auto out = path("o").string();
  ASSERT_EQ(run("train --seed 1 --config " + cfg + " --out " + out), 0);
  ASSERT_EQ(run("explain --seed 1 --config " + cfg + " --out " + out), 0);
  ASSERT_EQ(run("eval --points 11 --config " + cfg + " --out " + out), 0) << read(path("stderr.txt"));
  const auto inter = srnet::read_csv((path("o") / "interpolation.csv").string());
  const auto extra = srnet::read_csv((path("o") / "extrapolation.csv").string());
  EXPECT_EQ(inter.header, (std::vector<std::string>{"x", "y_nn", "y_srnet", "y_true"}));
  ASSERT_EQ(inter.values.rows(), 11u);
  ASSERT_EQ(extra.values.rows(), 11u);
  const double span_in = inter.values(10, 0) - inter.values(0, 0);
  const double span_ex = extra.values(10, 0) - extra.values(0, 0);
  EXPECT_DOUBLE_EQ(span_in, 2.0);
  EXPECT_DOUBLE_EQ(span_ex, 5.0 * span_in);
  EXPECT_DOUBLE_EQ(extra.values(0, 0) + extra.values(10, 0), 0.0);
  EXPECT_DOUBLE_EQ(inter.values(5, 3), 0.0);  // K0(0) = 0
}

TEST_F(Cli, SampleBoundaryOnClassifier) {
  std::ostringstream csv;
  csv << "a,b,label\n";
  for (int i = 0; i < 40; ++i) {
    const double a = -1.0 + 0.05 * i, b = 1.0 - 0.045 * i;
    csv << a << "," << b << "," << (a + b > 0.0 ? 1 : 0) << "\n";
  }
  write("cls.csv", csv.str());
  write("cls.conf", "task = classification\ndata = " + path("cls.csv").string() +
                        "\nhidden = [4]\nepochs = 20\n");
  const auto out = path("o").string();
  ASSERT_EQ(run("train --seed 1 --config " + path("cls.conf").string() + " --out " + out), 0)
      << read(path("stderr.txt"));
  ASSERT_EQ(run("sample-boundary --seed 2 --n 500 --s 25 --data " + path("cls.csv").string() + " --out " + out), 0)
      << read(path("stderr.txt"));
  const auto t = srnet::read_csv((path("o") / "boundary_samples.csv").string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "p_0", "p_1", "d"}));
  EXPECT_EQ(t.values.rows(), 25u);
  EXPECT_EQ(run("sample-boundary --n 500 --s 25 --data " + path("cls.csv").string() + " --out " + out), 2);
}

TEST_F(Cli, WidthMismatchIsDataError) {
  const auto cfg = k0_config();
  const auto out = path("o").string();
  ASSERT_EQ(run("train --seed 1 --config " + cfg + " --out " + out), 0);
  write("two.conf", "benchmark = K1\nepochs = 5\n");
  ASSERT_EQ(run("train --seed 1 --config " + path("two.conf").string() + " --out " + path("k1").string()), 0);
  EXPECT_EQ(run("explain --seed 1 --config " + cfg + " --out " + out), 0);
  EXPECT_EQ(run("eval --seed 1 --weights " + (path("k1") / "weights.json").string() + " --genotype " +
                (path("o") / "run0" / "genotype.json").string() + " --config " + path("two.conf").string() +
                " --out " + path("e").string()),
            3);
  EXPECT_NE(read(path("stderr.txt")).find("layer 0"), std::string::npos);
}
