#include <gtest/gtest.h>

#include <cctype>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "srnet/cgp.hpp"
#include "srnet/serialize.hpp"

using namespace srnet;

namespace {

CgpConfig grid(std::size_t inputs, std::size_t rows = 10, std::size_t cols = 10, std::size_t consts = 1) {
  return {inputs, rows, cols, consts, cols, 1};
}

// Minimal parser for the infix grammar emitted by to_infix, evaluating as it parses.
class InfixEvaluator {
 public:
  InfixEvaluator(const std::string& s, std::map<std::string, double> vars) : s_(s), vars_(std::move(vars)) {}

  double run() {
    const double v = expr();
    if (pos_ != s_.size()) throw std::runtime_error("trailing input at " + std::to_string(pos_));
    return v;
  }

 private:
  double expr() {
    if (peek() == '(') {
      ++pos_;
      if (peek() == '(') {
        // either "((a)^2)" or a parenthesised binary whose left operand starts with '('
        const std::size_t save = pos_;
        ++pos_;
        try {
          const double inner = expr();
          if (s_.compare(pos_, 4, ")^2)") == 0) {
            pos_ += 4;
            return inner * inner;
          }
        } catch (const std::exception&) {
        }
        pos_ = save;
      }
      const double a = expr();
      expect(' ');
      const char o = s_[pos_++];
      expect(' ');
      const double b = expr();
      expect(')');
      switch (o) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return oracle::op(3, a, b);
      }
      throw std::runtime_error("bad operator");
    }
    if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '-' || peek() == '.') {
      std::size_t used = 0;
      const double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      return v;
    }
    std::string name;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) name += s_[pos_++];
    if (peek() == '(') {
      ++pos_;
      const double a = expr();
      expect(')');
      static const std::map<std::string, int> codes{{"sqrt", 4}, {"sin", 6}, {"cos", 7},
                                                    {"ln", 8},   {"tan", 9}, {"exp", 10}};
      return oracle::op(codes.at(name), a, 0.0);
    }
    return vars_.at(name);
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    if (peek() != c) throw std::runtime_error(std::string("expected '") + c + "' at " + std::to_string(pos_));
    ++pos_;
  }

  std::string s_;
  std::map<std::string, double> vars_;
  std::size_t pos_ = 0;
};

}  // namespace

TEST(Functions, ProtectedOperators) {
  EXPECT_EQ(protected_ops::div(3.0, 0.0), 3.0);
  EXPECT_EQ(protected_ops::div(3.0, 1e-10), 3.0);
  EXPECT_EQ(protected_ops::div(3.0, 2.0), 1.5);
  EXPECT_EQ(protected_ops::ln(0.0), kLogZeroValue);
  EXPECT_DOUBLE_EQ(protected_ops::ln(-std::exp(2.0)), 2.0);
  EXPECT_EQ(protected_ops::ln(1e-300), std::max(std::log(1e-300), kLogZeroValue));
  EXPECT_EQ(protected_ops::sqrt(-4.0), 2.0);
  EXPECT_EQ(protected_ops::exp(1000.0), kOutputClamp);
  EXPECT_LE(std::fabs(protected_ops::tan(std::numbers::pi / 2)), kOutputClamp);
  EXPECT_TRUE(std::isnan(protected_ops::exp(std::nan(""))));
}

TEST(Functions, StandardSetOrderAndArity) {
  const auto& fs = standard_functions();
  ASSERT_EQ(fs.size(), 11u);
  const char* names[] = {"+", "-", "*", "/", "sqrt", "square", "sin", "cos", "ln", "tan", "exp"};
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(fs[static_cast<int>(i)].name, names[i]);
    EXPECT_EQ(fs[static_cast<int>(i)].arity, i < 4 ? 2u : 1u);
  }
}

TEST(RandomGenotype, SatisfiesInvariants) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto g = random_genotype(grid(3), standard_functions(), rng);
    EXPECT_NO_THROW(validate(g));
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      const std::size_t col = g.config.column_of(k);
      const std::size_t first_node_of_col = g.config.n_sources() + col * g.config.n_rows;
      EXPECT_LT(g.nodes[k].in_a, first_node_of_col);
      EXPECT_LT(g.nodes[k].in_b, first_node_of_col);
    }
    for (double c : g.constants) EXPECT_TRUE(c >= -1.0 && c <= 1.0);
  }
}

TEST(RandomGenotype, SingleCellGridReadsOnlySources) {
  Rng rng(2);
  const auto g = random_genotype(CgpConfig{2, 1, 1, 1, 1, 1}, standard_functions(), rng);
  EXPECT_LT(g.nodes[0].in_a, 3u);
  EXPECT_LT(g.nodes[0].in_b, 3u);
  EXPECT_EQ(g.outputs[0], 3u);
}

TEST(RandomGenotype, EveryOpcodeAppearsOver1000Draws) {
  Rng rng(3);
  std::set<int> seen;
  for (int t = 0; t < 1000; ++t) seen.insert(random_genotype(CgpConfig{1, 1, 1, 1, 1, 1}, standard_functions(), rng).nodes[0].opcode);
  EXPECT_EQ(seen.size(), 11u);
}

TEST(RandomGenotype, DeterministicPerSeed) {
  Rng a(42), b(42);
  EXPECT_EQ(random_genotype(grid(2), standard_functions(), a), random_genotype(grid(2), standard_functions(), b));
}

TEST(Decode, ThreeOutputExampleEvaluatesExactly) {
  const auto g = oracle::three_output_example();
  ASSERT_NO_THROW(validate(g));
  const auto trees = decode(g);
  ASSERT_EQ(trees.size(), 3u);
  std::mt19937_64 rng(5);
  const Matrix X = oracle::random_matrix(100, 2, rng, -10, 10);
  const auto oa = evaluate(trees[0], X, g.constants);
  const auto ob = evaluate(trees[1], X, g.constants);
  const auto oc = evaluate(trees[2], X, g.constants);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double x0 = X(r, 0), x1 = X(r, 1);
    EXPECT_EQ(oa[r], -x1);
    EXPECT_EQ(ob[r], 2 * x0 * x1 + x1 * x1);
    EXPECT_EQ(oc[r], 2 * x0 + x1);
  }
}

TEST(Decode, ThreeOutputExampleInfix) {
  const auto g = oracle::three_output_example();
  const auto trees = decode(g);
  const std::vector<std::string> v{"x0", "x1"};
  // No unary minus in the function set, so -x1 is spelled as a difference.
  EXPECT_EQ(to_infix(trees[0], v, g.constants), "((x1 - x1) - x1)");
  EXPECT_EQ(to_infix(trees[1], v, g.constants), "(((x0 + x0) * x1) + (x1 * x1))");
  EXPECT_EQ(to_infix(trees[2], v, g.constants), "((x0 + x0) + x1)");
}

TEST(Decode, SumOfTwoInputs) {
  // node code <0 0 1> at address 2: '+' of inputs 0 and 1
  Genotype g;
  g.config = {2, 1, 1, 0, 1, 1};
  g.nodes = {{0, 0, 1}};
  g.outputs = {2};
  const auto t = decode(g).front();
  EXPECT_EQ(to_infix(t, {"x0", "x1"}, g.constants), "(x0 + x1)");
  EXPECT_EQ(active_nodes(g), std::vector<std::size_t>{0});
}

TEST(Decode, OutputOnInputGivesLeaf) {
  Genotype g;
  g.config = {2, 1, 1, 1, 1, 1};
  g.nodes = {{6, 0, 0}};
  g.outputs = {1};
  g.constants = {0.5};
  const auto t = decode(g).front();
  EXPECT_EQ(t, ExpressionTree::input(1));
  EXPECT_TRUE(active_nodes(g).empty());
  g.outputs = {2};
  EXPECT_EQ(decode(g).front(), ExpressionTree::constant(0));
}

TEST(Infix, SquareAndCallForms) {
  const ExpressionTree sq{ExpressionTree::Kind::op, 5, {ExpressionTree::input(1)}};
  EXPECT_EQ(to_infix(sq, {"x0", "x1"}, {}), "((x1)^2)");
  const ExpressionTree s{ExpressionTree::Kind::op, 6, {ExpressionTree::constant(0)}};
  const std::vector<double> c{0.25};
  EXPECT_EQ(to_infix(s, {"x0"}, c), "sin(0.25)");
}

TEST(Infix, UnaryIgnoresSecondGene) {
  Genotype g;
  g.config = {2, 1, 1, 0, 1, 1};
  g.nodes = {{6, 0, 1}};
  g.outputs = {2};
  EXPECT_EQ(to_infix(decode(g).front(), {"a", "b"}, g.constants), "sin(a)");
}

TEST(Infix, RoundTripsThroughReferenceParser) {
  Rng rng(11);
  std::mt19937_64 xr(12);
  for (int t = 0; t < 300; ++t) {
    const auto g = random_genotype(CgpConfig{3, 4, 5, 2, 5, 1}, standard_functions(), rng);
    const auto tree = decode(g).front();
    const std::string s = to_infix(tree, {"a", "b", "c"}, g.constants);
    const Matrix X = oracle::random_matrix(5, 3, xr, -2, 2);
    const auto direct = evaluate(tree, X, g.constants);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const double parsed = InfixEvaluator(s, {{"a", X(r, 0)}, {"b", X(r, 1)}, {"c", X(r, 2)}}).run();
      if (std::isnan(direct[r])) {
        EXPECT_TRUE(std::isnan(parsed)) << s;
      } else {
        EXPECT_EQ(parsed, direct[r]) << s;
      }
    }
  }
}

TEST(Infix, Deterministic) {
  Rng a(9), b(9);
  const auto ga = random_genotype(grid(2), standard_functions(), a);
  const auto gb = random_genotype(grid(2), standard_functions(), b);
  EXPECT_EQ(to_infix(decode(ga).front(), {"x", "y"}, ga.constants), to_infix(decode(gb).front(), {"x", "y"}, gb.constants));
}

TEST(Evaluate, MatchesGraphEvaluationAndOracle) {
  Rng rng(21);
  std::mt19937_64 xr(22);
  for (int t = 0; t < 200; ++t) {
    const auto g = random_genotype(grid(2), standard_functions(), rng);
    const Matrix X = oracle::random_matrix(100, 2, xr, -3, 3);
    const auto tree_vals = evaluate(decode(g).front(), X, g.constants);
    const auto graph_vals = evaluate_graph(g, X);
    const auto ref = oracle::eval_output(g, X);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      if (std::isnan(ref[r])) {
        EXPECT_TRUE(std::isnan(tree_vals[r]) && std::isnan(graph_vals[r]));
        continue;
      }
      EXPECT_EQ(tree_vals[r], graph_vals[r]);
      EXPECT_EQ(tree_vals[r], ref[r]);
    }
  }
}

TEST(Evaluate, ConstantSlotAndInputCount) {
  Genotype g;
  g.config = {1, 1, 1, 1, 1, 1};
  g.nodes = {{2, 0, 1}};
  g.outputs = {2};
  g.constants = {3.0};
  const Matrix X{{2.0}, {-1.0}};
  EXPECT_EQ(evaluate_graph(g, X), (std::vector<double>{6.0, -3.0}));
  EXPECT_THROW(evaluate_graph(g, Matrix(2, 2)), DimensionError);
}

TEST(Evaluate, NeverThrowsOnExtremeInputs) {
  Rng rng(31);
  const Matrix X{{0.0}, {1e300}, {-1e300}, {std::numeric_limits<double>::quiet_NaN()}, {1e-320}};
  for (int t = 0; t < 300; ++t) {
    const auto g = random_genotype(grid(1), standard_functions(), rng);
    EXPECT_NO_THROW(evaluate_graph(g, X));
  }
}

TEST(ActiveNodes, ExampleGraph) {
  const auto g = oracle::three_output_example();
  EXPECT_EQ(active_nodes(g), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(Mutation, ZeroProbabilityIsIdentity) {
  Rng rng(41);
  const auto g = random_genotype(grid(2), standard_functions(), rng);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(mutate(g, 0.0, rng), g);
}

TEST(Mutation, FullProbabilityKeepsOutputsAndValidity) {
  Rng rng(42);
  const auto g = random_genotype(grid(2), standard_functions(), rng);
  for (int t = 0; t < 50; ++t) {
    const auto m = mutate(g, 1.0, rng);
    EXPECT_EQ(m.outputs, g.outputs);
    EXPECT_NO_THROW(validate(m));
  }
}

TEST(Mutation, RejectsBadProbability) {
  Rng rng(43);
  const auto g = random_genotype(grid(1), standard_functions(), rng);
  EXPECT_THROW(mutate(g, 1.5, rng), ConfigError);
  EXPECT_THROW(mutate(g, -0.1, rng), ConfigError);
}

TEST(Mutation, PerGeneChangeRateMatchesResampling) {
  // A resampled gene keeps its value with probability 1/k, so it changes at rate p (1 - 1/k).
  const CgpConfig cfg{2, 3, 4, 1, 4, 1};
  Rng rng(44);
  const auto g = random_genotype(cfg, standard_functions(), rng);
  const double p = 0.4;
  const int trials = 10000;
  std::vector<int> op_changes(g.nodes.size()), a_changes(g.nodes.size());
  for (int t = 0; t < trials; ++t) {
    const auto m = mutate(g, p, rng);
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      op_changes[k] += m.nodes[k].opcode != g.nodes[k].opcode;
      a_changes[k] += m.nodes[k].in_a != g.nodes[k].in_a;
    }
  }
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const double k_ops = 11.0;
    const double k_src = static_cast<double>(valid_source_count(cfg, cfg.column_of(k)));
    for (auto [count, kk] : {std::pair{op_changes[k], k_ops}, std::pair{a_changes[k], k_src}}) {
      const double rate = p * (1.0 - 1.0 / kk);
      const double sigma = std::sqrt(rate * (1.0 - rate) / trials);
      EXPECT_NEAR(static_cast<double>(count) / trials, rate, 3.0 * sigma + 1e-12) << "node " << k << " k " << kk;
    }
  }
}

TEST(Mutation, ClosureOverLongSequences) {
  Rng rng(45);
  for (int run = 0; run < 20; ++run) {
    auto g = random_genotype(CgpConfig{3, 5, 6, 2, 3, 2}, standard_functions(), rng);
    for (int step = 0; step < 100; ++step) {
      g = mutate(g, 0.3, rng);
      ASSERT_NO_THROW(validate(g));
    }
  }
}

TEST(Mutation, InactiveChangesAreNeutral) {
  Rng rng(46);
  std::mt19937_64 xr(47);
  for (int t = 0; t < 100; ++t) {
    const auto g = random_genotype(grid(2), standard_functions(), rng);
    const auto active = active_nodes(g);
    auto m = mutate(g, 1.0, rng);
    m.constants = g.constants;
    // Restore every active node so only inactive genes differ.
    for (std::size_t k : active) m.nodes[k] = g.nodes[k];
    const Matrix X = oracle::random_matrix(50, 2, xr);
    const auto before = evaluate_graph(g, X);
    const auto after = evaluate_graph(m, X);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      if (std::isnan(before[r]))
        EXPECT_TRUE(std::isnan(after[r]));
      else
        EXPECT_EQ(before[r], after[r]);
    }
  }
}

TEST(Mutation, DeterministicStream) {
  Rng a(50), b(50);
  const auto g = random_genotype(grid(2), standard_functions(), a);
  random_genotype(grid(2), standard_functions(), b);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(mutate(g, 0.4, a), mutate(g, 0.4, b));
}

TEST(GenotypeJson, RoundTripAndFieldOrder) {
  Rng rng(60);
  const auto g = random_genotype(grid(2), standard_functions(), rng);
  const auto j = to_json(g);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "function_genes", "output_genes", "constants"}));
  EXPECT_EQ(j["function_genes"].size(), 3 * g.nodes.size());
  EXPECT_EQ(genotype_from_json(j), g);
  EXPECT_EQ(to_json(genotype_from_json(j)).dump(), j.dump());
}

TEST(GenotypeJson, RejectsInvalidGenes) {
  Rng rng(61);
  auto j = to_json(random_genotype(grid(2), standard_functions(), rng));
  j["function_genes"][1] = 999;
  EXPECT_THROW(genotype_from_json(j), SchemaError);
  j = to_json(random_genotype(grid(2), standard_functions(), rng));
  j["function_genes"].erase(0);
  EXPECT_THROW(genotype_from_json(j), SchemaError);
}
