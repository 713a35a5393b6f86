#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/functions.hpp"
#include "srnet/matrix.hpp"

namespace srnet {

using Rng = std::mt19937_64;

inline const FunctionSet& standard_functions() {
  static const FunctionSet fs = FunctionSet::standard();
  return fs;
}

/// Grid shape of one CGP chromosome.
///
/// Addresses are laid out as [inputs | constants | nodes], with nodes
/// numbered column-major (node k lives in column k / n_rows).
struct CgpConfig {
  std::size_t n_inputs = 1;
  std::size_t n_rows = 10;
  std::size_t n_cols = 10;
  std::size_t n_constants = 1;
  std::size_t levels_back = 10;
  std::size_t n_outputs = 1;

  [[nodiscard]] std::size_t n_sources() const noexcept { return n_inputs + n_constants; }
  [[nodiscard]] std::size_t n_nodes() const noexcept { return n_rows * n_cols; }
  [[nodiscard]] std::size_t n_addresses() const noexcept { return n_sources() + n_nodes(); }
  [[nodiscard]] std::size_t column_of(std::size_t node) const noexcept { return node / n_rows; }

  void validate() const {
    if (n_inputs < 1 || n_rows < 1 || n_cols < 1 || n_outputs < 1 || levels_back < 1)
      throw ConfigError("CGP counts must be >= 1");
    if (levels_back > n_cols) throw ConfigError("levels_back must not exceed n_cols");
  }

  friend bool operator==(const CgpConfig&, const CgpConfig&) = default;
};

struct FunctionGene {
  int opcode = 0;
  std::size_t in_a = 0;
  std::size_t in_b = 0;

  friend bool operator==(const FunctionGene&, const FunctionGene&) = default;
};

struct Genotype {
  CgpConfig config;
  std::vector<FunctionGene> nodes;   // n_rows * n_cols entries
  std::vector<std::size_t> outputs;  // addresses
  std::vector<double> constants;     // n_constants entries

  friend bool operator==(const Genotype&, const Genotype&) = default;
};

/// Half-open range of node indices addressable from column `col`.
inline std::pair<std::size_t, std::size_t> reachable_nodes(const CgpConfig& cfg, std::size_t col) {
  const std::size_t lo_col = col > cfg.levels_back ? col - cfg.levels_back : 0;
  return {lo_col * cfg.n_rows, col * cfg.n_rows};
}

/// Number of distinct values an input gene of a node in `col` may take.
inline std::size_t valid_source_count(const CgpConfig& cfg, std::size_t col) {
  auto [lo, hi] = reachable_nodes(cfg, col);
  return cfg.n_sources() + (hi - lo);
}

inline bool is_valid_source(const CgpConfig& cfg, std::size_t col, std::size_t address) {
  if (address < cfg.n_sources()) return true;
  auto [lo, hi] = reachable_nodes(cfg, col);
  const std::size_t node = address - cfg.n_sources();
  return node >= lo && node < hi;
}

inline std::size_t random_source(const CgpConfig& cfg, std::size_t col, Rng& rng) {
  auto [lo, hi] = reachable_nodes(cfg, col);
  std::uniform_int_distribution<std::size_t> pick(0, valid_source_count(cfg, col) - 1);
  std::size_t u = pick(rng);
  return u < cfg.n_sources() ? u : cfg.n_sources() + lo + (u - cfg.n_sources());
}

/// Throws DataError naming the first violated structural invariant.
inline void validate(const Genotype& g, const FunctionSet& fs = standard_functions()) {
  const auto& cfg = g.config;
  cfg.validate();
  if (g.nodes.size() != cfg.n_nodes()) throw DataError("genotype node count does not match grid");
  if (g.outputs.size() != cfg.n_outputs) throw DataError("genotype output count does not match config");
  if (g.constants.size() != cfg.n_constants) throw DataError("genotype constant count does not match config");
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const auto& n = g.nodes[k];
    if (n.opcode < 0 || static_cast<std::size_t>(n.opcode) >= fs.size())
      throw DataError("node " + std::to_string(k) + ": opcode out of range");
    const std::size_t col = cfg.column_of(k);
    if (!is_valid_source(cfg, col, n.in_a) || !is_valid_source(cfg, col, n.in_b))
      throw DataError("node " + std::to_string(k) + ": input gene addresses an invalid source");
  }
  for (std::size_t o : g.outputs)
    if (o >= cfg.n_addresses()) throw DataError("output gene out of range");
}

/// Output genes are drawn from the last column; constants uniform on [-1, 1].
inline Genotype random_genotype(const CgpConfig& cfg, const FunctionSet& fs, Rng& rng) {
  cfg.validate();
  Genotype g;
  g.config = cfg;
  g.nodes.resize(cfg.n_nodes());
  std::uniform_int_distribution<int> pick_op(0, static_cast<int>(fs.size()) - 1);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const std::size_t col = cfg.column_of(k);
    g.nodes[k].opcode = pick_op(rng);
    g.nodes[k].in_a = random_source(cfg, col, rng);
    g.nodes[k].in_b = random_source(cfg, col, rng);
  }
  std::uniform_int_distribution<std::size_t> pick_out(0, cfg.n_rows - 1);
  const std::size_t last_col_start = cfg.n_sources() + (cfg.n_cols - 1) * cfg.n_rows;
  for (std::size_t o = 0; o < cfg.n_outputs; ++o) g.outputs.push_back(last_col_start + pick_out(rng));
  std::uniform_real_distribution<double> pick_const(-1.0, 1.0);
  for (std::size_t c = 0; c < cfg.n_constants; ++c) g.constants.push_back(pick_const(rng));
  return g;
}

/// Sorted node indices reachable backwards from `roots`.
inline std::vector<std::size_t> reachable_from(const Genotype& g, std::span<const std::size_t> roots,
                                               const FunctionSet& fs = standard_functions()) {
  const auto& cfg = g.config;
  std::vector<char> active(cfg.n_nodes(), 0);
  auto mark = [&](std::size_t address) {
    if (address >= cfg.n_sources()) active[address - cfg.n_sources()] = 1;
  };
  for (std::size_t o : roots) mark(o);
  // Inputs always point to earlier columns, so one backward sweep reaches the fixed point.
  for (std::size_t k = cfg.n_nodes(); k-- > 0;) {
    if (!active[k]) continue;
    mark(g.nodes[k].in_a);
    if (fs[g.nodes[k].opcode].arity == 2) mark(g.nodes[k].in_b);
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < active.size(); ++k)
    if (active[k]) out.push_back(k);
  return out;
}

/// Sorted node indices reachable backwards from the output genes.
inline std::vector<std::size_t> active_nodes(const Genotype& g, const FunctionSet& fs = standard_functions()) {
  return reachable_from(g, g.outputs, fs);
}

/// Evaluates output `output` of `g` directly on the graph, one vector per active node.
inline std::vector<double> evaluate_graph(const Genotype& g, const Matrix& inputs, std::size_t output = 0,
                                          const FunctionSet& fs = standard_functions()) {
  const auto& cfg = g.config;
  if (inputs.cols() != cfg.n_inputs)
    throw DimensionError("input has " + std::to_string(inputs.cols()) + " columns, genotype expects " +
                         std::to_string(cfg.n_inputs));
  const std::size_t n = inputs.rows();
  const std::size_t root = g.outputs.at(output);

  std::vector<std::vector<double>> values(cfg.n_addresses());
  auto source = [&](std::size_t address) -> const std::vector<double>& {
    auto& v = values[address];
    if (v.empty() && n > 0) {
      if (address < cfg.n_inputs) {
        v = inputs.column(address);
      } else if (address < cfg.n_sources()) {
        v.assign(n, g.constants[address - cfg.n_inputs]);
      }
    }
    return v;
  };

  if (root < cfg.n_sources()) return source(root);

  const std::size_t roots[] = {root};
  for (std::size_t k : reachable_from(g, roots, fs)) {
    const auto& node = g.nodes[k];
    const auto& entry = fs[node.opcode];
    const auto& a = source(node.in_a);
    const auto& b = entry.arity == 2 ? source(node.in_b) : a;
    auto& out = values[cfg.n_sources() + k];
    out.resize(n);
    apply_op(entry.op, a, b, out);
  }
  return values[root];
}

// ---------------------------------------------------------------------------
// Phenotype

struct ExpressionTree {
  enum class Kind { input, constant, op };

  Kind kind = Kind::input;
  std::size_t index = 0;  // input column, constant slot, or opcode
  std::vector<ExpressionTree> children;

  static ExpressionTree input(std::size_t i) { return {Kind::input, i, {}}; }
  static ExpressionTree constant(std::size_t slot) { return {Kind::constant, slot, {}}; }

  friend bool operator==(const ExpressionTree&, const ExpressionTree&) = default;
};

inline ExpressionTree decode_address(const Genotype& g, std::size_t address, const FunctionSet& fs) {
  const auto& cfg = g.config;
  if (address < cfg.n_inputs) return ExpressionTree::input(address);
  if (address < cfg.n_sources()) return ExpressionTree::constant(address - cfg.n_inputs);
  const auto& node = g.nodes[address - cfg.n_sources()];
  ExpressionTree t{ExpressionTree::Kind::op, static_cast<std::size_t>(node.opcode), {}};
  t.children.push_back(decode_address(g, node.in_a, fs));
  if (fs[node.opcode].arity == 2) t.children.push_back(decode_address(g, node.in_b, fs));
  return t;
}

/// One tree per output gene; inactive nodes never appear.
inline std::vector<ExpressionTree> decode(const Genotype& g, const FunctionSet& fs = standard_functions()) {
  std::vector<ExpressionTree> out;
  out.reserve(g.outputs.size());
  for (std::size_t o : g.outputs) out.push_back(decode_address(g, o, fs));
  return out;
}

inline std::size_t tree_size(const ExpressionTree& t) {
  std::size_t n = 1;
  for (const auto& c : t.children) n += tree_size(c);
  return n;
}

inline std::size_t max_input_index(const ExpressionTree& t, std::size_t acc = 0) {
  if (t.kind == ExpressionTree::Kind::input) return std::max(acc, t.index + 1);
  for (const auto& c : t.children) acc = max_input_index(c, acc);
  return acc;
}

inline std::vector<double> evaluate(const ExpressionTree& expr, const Matrix& inputs, std::span<const double> constants,
                                    const FunctionSet& fs = standard_functions()) {
  if (max_input_index(expr) > inputs.cols()) throw DimensionError("expression references a missing input column");
  switch (expr.kind) {
    case ExpressionTree::Kind::input:
      return inputs.column(expr.index);
    case ExpressionTree::Kind::constant:
      if (expr.index >= constants.size()) throw DimensionError("expression references a missing constant");
      return std::vector<double>(inputs.rows(), constants[expr.index]);
    case ExpressionTree::Kind::op: {
      const auto& entry = fs[expr.index];
      auto a = evaluate(expr.children.at(0), inputs, constants, fs);
      std::vector<double> out(a.size());
      if (entry.arity == 2) {
        auto b = evaluate(expr.children.at(1), inputs, constants, fs);
        apply_op(entry.op, a, b, out);
      } else {
        apply_op(entry.op, a, a, out);
      }
      return out;
    }
  }
  return {};
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Shortest decimal that round-trips when `digits` is 0, else `digits` significant digits.
inline std::string format_number(double v, int digits = 0) {
  char buf[64];
  if (digits <= 0) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
  }
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return {buf, res.ptr};
}

/// Fully parenthesised infix. Constants print exactly unless `digits` > 0.
inline std::string to_infix(const ExpressionTree& expr, const std::vector<std::string>& var_names,
                            std::span<const double> constants, const FunctionSet& fs = standard_functions(),
                            int digits = 0) {
  switch (expr.kind) {
    case ExpressionTree::Kind::input:
      if (expr.index >= var_names.size()) throw DimensionError("no variable name for input " + std::to_string(expr.index));
      return var_names[expr.index];
    case ExpressionTree::Kind::constant:
      return format_number(constants[expr.index], digits);
    case ExpressionTree::Kind::op: {
      const auto& entry = fs[expr.index];
      auto a = to_infix(expr.children.at(0), var_names, constants, fs, digits);
      switch (entry.style) {
        case InfixStyle::binary:
          return "(" + a + " " + entry.name + " " + to_infix(expr.children.at(1), var_names, constants, fs, digits) +
                 ")";
        case InfixStyle::square:
          return "((" + a + ")^2)";
        case InfixStyle::call:
          return entry.name + "(" + a + ")";
      }
    }
  }
  return {};
}

inline std::vector<std::string> indexed_names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

// ---------------------------------------------------------------------------
// Variation

inline constexpr double kConstantSigma = 0.1;
inline constexpr double kConstantRedrawFactor = 0.1;

/// Point mutation: every function and input gene is resampled uniformly from its valid
/// set with probability `per_gene_prob`. Output genes are never touched.
inline Genotype mutate(const Genotype& parent, double per_gene_prob, Rng& rng,
                       const FunctionSet& fs = standard_functions()) {
  if (per_gene_prob < 0.0 || per_gene_prob > 1.0) throw ConfigError("mutation probability must lie in [0, 1]");
  Genotype g = parent;
  const auto& cfg = g.config;
  std::bernoulli_distribution hit(per_gene_prob);
  std::uniform_int_distribution<int> pick_op(0, static_cast<int>(fs.size()) - 1);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const std::size_t col = cfg.column_of(k);
    auto& node = g.nodes[k];
    if (hit(rng)) node.opcode = pick_op(rng);
    if (hit(rng)) node.in_a = random_source(cfg, col, rng);
    if (hit(rng)) node.in_b = random_source(cfg, col, rng);
  }
  std::normal_distribution<double> jitter(0.0, kConstantSigma);
  std::bernoulli_distribution redraw(kConstantRedrawFactor * per_gene_prob);
  std::uniform_real_distribution<double> fresh(-1.0, 1.0);
  for (double& c : g.constants) {
    if (hit(rng)) c += jitter(rng);
    if (redraw(rng)) c = fresh(rng);
  }
  return g;
}

}  // namespace srnet
