#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/matrix.hpp"
#include "srnet/mlp.hpp"

namespace srnet {

struct Variable {
  std::string name;
  double lo;
  double hi;
};

/// Ground-truth regression benchmark together with the network used to learn it.
struct BenchmarkSpec {
  std::string id;
  std::string formula;
  std::vector<Variable> variables;
  std::size_t samples = 200;
  std::function<double(std::span<const double>)> fn;
  std::vector<std::size_t> hidden;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 0.01;
  std::size_t epochs = 1000;
  std::size_t batch_size = 1;
  double exclude_radius = 0.0;  // resample points with |x_0| below this

  [[nodiscard]] std::size_t dim() const noexcept { return variables.size(); }
  [[nodiscard]] double operator()(std::span<const double> x) const { return fn(x); }
};

namespace detail {

inline std::vector<Variable> same_range(std::initializer_list<const char*> names, double lo, double hi) {
  std::vector<Variable> v;
  for (const char* n : names) v.push_back({n, lo, hi});
  return v;
}

}  // namespace detail

inline std::vector<std::string> benchmark_ids() {
  return {"K0", "K1", "K2", "K3", "K4", "K5", "F0", "F1", "F2", "F3", "F4", "F5"};
}

inline BenchmarkSpec benchmark(const std::string& id) {
  using std::cos, std::sin, std::sqrt, std::log, std::abs, std::pow;
  constexpr double pi = std::numbers::pi;
  BenchmarkSpec s;
  s.id = id;
  if (id == "K0") {
    s.formula = "sin(x) + sin(x + x^2)";
    s.variables = {{"x", -1, 1}};
    s.fn = [](auto v) { return sin(v[0]) + sin(v[0] + v[0] * v[0]); };
    s.hidden = {3, 3};
    s.learning_rate = 0.01;
    s.epochs = 3000;
  } else if (id == "K1") {
    s.formula = "2 sin(x) cos(y)";
    s.variables = detail::same_range({"x", "y"}, -1, 1);
    s.fn = [](auto v) { return 2.0 * sin(v[0]) * cos(v[1]); };
    s.hidden = {3, 3};
    s.learning_rate = 0.1;
    s.epochs = 1000;
  } else if (id == "K2") {
    s.formula = "3 + 2.13 ln|x|";
    s.variables = {{"x", -50, 50}};
    s.fn = [](auto v) { return 3.0 + 2.13 * log(abs(v[0])); };
    s.hidden = {5, 5};
    s.learning_rate = 0.03;
    s.epochs = 1000;
    s.exclude_radius = 1e-6;
  } else if (id == "K3") {
    s.formula = "1 / (1 + x^-4) + 1 / (1 + y^4)";
    s.variables = detail::same_range({"x", "y"}, -5, 5);
    s.samples = 10000;
    s.fn = [](auto v) { return 1.0 / (1.0 + pow(v[0], -4.0)) + 1.0 / (1.0 + pow(v[1], 4.0)); };
    s.hidden = {4, 4, 4};
    s.optimizer = OptimizerKind::adam;
    s.learning_rate = 0.03;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "K4") {
    s.formula = "30 x y / ((x - 10) z^2)";
    s.variables = {{"x", -1, 1}, {"y", -1, 1}, {"z", 1, 2}};
    s.samples = 1000;
    s.fn = [](auto v) { return 30.0 * v[0] * v[1] / ((v[0] - 10.0) * v[2] * v[2]); };
    s.hidden = {4, 4};
    s.optimizer = OptimizerKind::adam;
    s.learning_rate = 0.003;
    s.epochs = 300;
    s.batch_size = 16;
  } else if (id == "K5") {
    s.formula = "x y + sin((x - 1)(y - 1))";
    s.variables = detail::same_range({"x", "y"}, -3, 3);
    s.samples = 20;
    s.fn = [](auto v) { return v[0] * v[1] + sin((v[0] - 1.0) * (v[1] - 1.0)); };
    s.hidden = {5, 5};
    s.optimizer = OptimizerKind::adam;
    s.learning_rate = 0.003;
    s.epochs = 3000;
  } else if (id == "F0") {
    s.formula = "m0 / sqrt(1 - v^2 / c^2)";
    s.variables = {{"m0", 1, 5}, {"v", 1, 2}, {"c", 3, 10}};
    s.samples = 10000;
    s.fn = [](auto v) { return v[0] / sqrt(1.0 - v[1] * v[1] / (v[2] * v[2])); };
    s.hidden = {3, 3};
    s.optimizer = OptimizerKind::adam;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "F1") {
    s.formula = "q1 q2 r / (e r^3)";
    s.variables = detail::same_range({"q1", "q2", "e", "r"}, 1, 5);
    s.samples = 10000;
    s.fn = [](auto v) { return v[0] * v[1] * v[3] / (v[2] * v[3] * v[3] * v[3]); };
    s.hidden = {3, 3};
    s.optimizer = OptimizerKind::adam;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "F2") {
    s.formula = "G m1 m2 (1 / r2 - 1 / r1)";
    s.variables = detail::same_range({"G", "m1", "m2", "r1", "r2"}, 1, 5);
    s.samples = 10000;
    s.fn = [](auto v) { return v[0] * v[1] * v[2] * (1.0 / v[4] - 1.0 / v[3]); };
    s.hidden = {3, 3};
    s.optimizer = OptimizerKind::adam;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "F3") {
    s.formula = "k x^2 / 2";
    s.variables = detail::same_range({"k", "x"}, 1, 5);
    s.samples = 10000;
    s.fn = [](auto v) { return 0.5 * v[0] * v[1] * v[1]; };
    s.hidden = {3, 3};
    s.optimizer = OptimizerKind::adam;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "F4") {
    s.formula = "-6.4 G^4 / c^5 / r^5 (m1 m2)^2 (m1 + m2)";
    s.variables = {{"G", 1, 2}, {"c", 1, 2}, {"m1", 1, 5}, {"m2", 1, 5}, {"r", 1, 2}};
    s.samples = 10000;
    s.fn = [](auto v) {
      const double G = v[0], c = v[1], m1 = v[2], m2 = v[3], r = v[4];
      return -6.4 * pow(G, 4) / pow(c, 5) / pow(r, 5) * (m1 * m2) * (m1 * m2) * (m1 + m2);
    };
    s.hidden = {5, 5};
    s.optimizer = OptimizerKind::adam;
    s.learning_rate = 0.03;
    s.epochs = 50;
    s.batch_size = 32;
  } else if (id == "F5") {
    s.formula = "q / (4 pi eps y^2) (4 pi eps Ve d - q d y^3 / (y^2 - d^2)^2)";
    s.variables = {{"q", 1, 5}, {"Ve", 1, 5}, {"eps", 1, 5}, {"d", 4, 6}, {"y", 1, 3}};
    s.samples = 10000;
    s.fn = [](auto v) {
      const double q = v[0], ve = v[1], eps = v[2], d = v[3], y = v[4];
      const double k = 4.0 * pi * eps;
      const double den = y * y - d * d;
      return q / (k * y * y) * (k * ve * d - q * d * y * y * y / (den * den));
    };
    s.hidden = {3, 3};
    s.optimizer = OptimizerKind::adam;
    s.learning_rate = 0.03;
    s.epochs = 50;
    s.batch_size = 32;
  } else {
    throw ConfigError("unknown benchmark '" + id + "'");
  }
  return s;
}

inline TrainConfig default_train_config(const BenchmarkSpec& s, std::uint64_t seed) {
  TrainConfig c;
  c.optimizer = s.optimizer;
  c.learning_rate = s.learning_rate;
  c.epochs = s.epochs;
  c.batch_size = s.batch_size;
  c.seed = seed;
  return c;
}

/// Samples every variable uniformly in its range and evaluates the ground truth.
inline Dataset generate(const BenchmarkSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.X = Matrix(spec.samples, spec.dim());
  d.Y = Matrix(spec.samples, 1);
  for (const auto& v : spec.variables) d.feature_names.push_back(v.name);
  for (std::size_t r = 0; r < spec.samples; ++r) {
    auto row = d.X.row(r);
    do {
      for (std::size_t c = 0; c < spec.dim(); ++c) {
        std::uniform_real_distribution<double> u(spec.variables[c].lo, spec.variables[c].hi);
        row[c] = u(rng);
      }
    } while (spec.exclude_radius > 0.0 && std::abs(row[0]) < spec.exclude_radius);
    d.Y(r, 0) = spec(row);
  }
  return d;
}

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Seeded shuffle, then the first floor(fraction * n) rows train.
inline Split split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (data.size() < 2) throw DataError("need at least two samples to split");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(data.size())));
  Split s;
  s.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  s.train = {select_rows(data.X, s.train_index), select_rows(data.Y, s.train_index), data.feature_names};
  s.test = {select_rows(data.X, s.test_index), select_rows(data.Y, s.test_index), data.feature_names};
  return s;
}

}  // namespace srnet
