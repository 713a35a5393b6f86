#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "srnet/config.hpp"
#include "srnet/csv.hpp"
#include "srnet/report.hpp"

using namespace srnet;

TEST(Csv, ReadsHeaderAndValues) {
  std::istringstream is("a, b,y\r\n1,2.5,3\n\n-4,5e-3 ,6\n");
  const auto t = read_csv(is);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "y"}));
  EXPECT_EQ(t.values, (Matrix{{1, 2.5, 3}, {-4, 5e-3, 6}}));
}

TEST(Csv, ErrorsNameTheLine) {
  std::istringstream ragged("a,b\n1,2\n3\n");
  try {
    read_csv(ragged, "data.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos);
  }
  std::istringstream text("a\nfoo\n");
  EXPECT_THROW(read_csv(text), DataError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), DataError);
  EXPECT_THROW(read_csv("/nonexistent/dir/file.csv"), DataError);
}

TEST(Csv, WriteReadRoundTripIsExact) {
  const Matrix m{{0.1, 1.0 / 3.0}, {-1e-300, 12345.678}};
  std::ostringstream os;
  write_csv(os, {"p", "q"}, m);
  std::istringstream is(os.str());
  EXPECT_EQ(read_csv(is).values, m);
}

TEST(Dataset, ClassLabelsBecomeOneHot) {
  std::istringstream is("x0,x1,label\n0.5,1,0\n0.2,2,2\n0.1,3,1\n");
  const auto d = dataset_from_table(read_csv(is), true);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x0", "x1"}));
  EXPECT_EQ(d.Y, (Matrix{{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}));

  std::ostringstream os;
  write_dataset(os, d, true);
  EXPECT_EQ(os.str(), "x0,x1,y\n0.5,1,0\n0.2,2,2\n0.1,3,1\n");
}

TEST(Dataset, RejectsBadLabelsAndShapes) {
  std::istringstream frac("x,label\n1,0.5\n");
  EXPECT_THROW(dataset_from_table(read_csv(frac), true), DataError);
  std::istringstream big("x,label\n1,5\n");
  EXPECT_THROW(dataset_from_table(read_csv(big), true, 1, 3), DataError);
  std::istringstream one("y\n1\n");
  EXPECT_THROW(dataset_from_table(read_csv(one), false), DataError);
}

TEST(Dataset, MultipleRegressionTargets) {
  std::istringstream is("x,y0,y1\n1,2,3\n");
  const auto d = dataset_from_table(read_csv(is), false, 2);
  EXPECT_EQ(d.X, (Matrix{{1}}));
  EXPECT_EQ(d.Y, (Matrix{{2, 3}}));
}

TEST(Config, SectionsCommentsAndLists) {
  std::istringstream is(
      "# experiment\n"
      "benchmark = K0\n"
      "hidden = [3, 3]\n"
      "name = \"quoted value\"\n"
      "[evolve]\n"
      "lambda = 50   # offspring\n"
      "mutation_prob = 0.25\n");
  const auto cfg = KeyValueConfig::parse(is);
  EXPECT_EQ(cfg.require("benchmark"), "K0");
  EXPECT_EQ(cfg.get("name", ""), "quoted value");
  EXPECT_EQ(cfg.get_sizes("hidden", {}), (std::vector<std::size_t>{3, 3}));
  EXPECT_EQ(cfg.get_uint("evolve.lambda", 0), 50u);
  EXPECT_DOUBLE_EQ(cfg.get_double("evolve.mutation_prob", 0.0), 0.25);
  EXPECT_EQ(cfg.get_uint("evolve.max_generations", 7), 7u);
  EXPECT_EQ(cfg.dump().substr(0, 16), "benchmark = K0\ne");
}

TEST(Config, Errors) {
  std::istringstream no_eq("just words\n");
  EXPECT_THROW(KeyValueConfig::parse(no_eq), ConfigError);
  std::istringstream bad_section("[open\n");
  EXPECT_THROW(KeyValueConfig::parse(bad_section), ConfigError);
  std::istringstream values("n = -3\nx = 1.5abc\n");
  const auto cfg = KeyValueConfig::parse(values);
  EXPECT_THROW((void)cfg.get_uint("n", 0), ConfigError);
  EXPECT_THROW((void)cfg.get_double("x", 0.0), ConfigError);
  EXPECT_THROW(cfg.require("missing"), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/file.conf"), ConfigError);
}

TEST(Report, PerLayerAndComposedExpressions) {
  const auto g = fixture::planted_genotype();
  FitnessReport r;
  r.per_layer_mse = {0.5};
  r.output_loss = 0.25;
  r.total = 0.75;
  const auto text = expression_report(g, r, {"u", "v"});
  EXPECT_NE(text.find("hidden layer 0: f0 = (u * v)"), std::string::npos) << text;
  EXPECT_NE(text.find("output layer: f1 = sin(h0_2)"), std::string::npos) << text;
  EXPECT_NE(text.find("  w = [0.5, -1, 2]"), std::string::npos);
  EXPECT_NE(text.find("total fitness = 0.75"), std::string::npos);
  EXPECT_NE(text.find("  y0 = (1.5 * sin((2 * (u * v) + -0.3)) + 0.25)"), std::string::npos) << text;
}

TEST(Report, FallsBackToIndexedNames) {
  const auto g = fixture::planted_genotype();
  EXPECT_EQ(layer_expression(g, 0, {}), "(x0 * x1)");
  EXPECT_EQ(layer_input_names(g, 1, {}), (std::vector<std::string>{"h0_0", "h0_1", "h0_2"}));
}
