#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/matrix.hpp"
#include "srnet/mlp.hpp"

namespace srnet {

/// Sum over classes of |p_k - 1/C|; zero exactly on the uniform distribution.
inline double boundary_distance(std::span<const double> probs) {
  if (probs.empty()) throw DataError("empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DataError("negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("probabilities do not sum to 1");
  const double uniform = 1.0 / static_cast<double>(probs.size());
  double d = 0.0;
  for (double p : probs) d += std::abs(p - uniform);
  return d;
}

struct FeatureBounds {
  std::vector<std::pair<double, double>> ranges;

  /// Per-column min/max, widened on each side by `margin` times the span.
  static FeatureBounds from_data(const Matrix& X, double margin = 0.0) {
    if (X.rows() == 0) throw DataError("cannot derive bounds from an empty dataset");
    FeatureBounds b;
    for (std::size_t c = 0; c < X.cols(); ++c) {
      double lo = X(0, c), hi = X(0, c);
      for (std::size_t r = 1; r < X.rows(); ++r) lo = std::min(lo, X(r, c)), hi = std::max(hi, X(r, c));
      const double pad = margin * (hi - lo);
      b.ranges.emplace_back(lo - pad, hi + pad);
    }
    return b;
  }
};

struct UsdbConfig {
  std::size_t pool_size = 50000;
  std::size_t keep_size = 1000;
  FeatureBounds bounds;
  std::uint64_t seed = 0;

  void validate() const {
    if (keep_size > pool_size) throw ConfigError("keep size exceeds pool size");
    for (const auto& [lo, hi] : bounds.ranges)
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw ConfigError("invalid feature bounds");
  }
};

struct UsdbSample {
  Matrix points;                // keep_size x d_in
  Matrix probs;                 // model output on `points`
  std::vector<double> distance; // boundary distance per point, ascending
  std::vector<std::size_t> pool_index;  // draw order of each kept point
};

/// Uniform pool within the bounds, row by row in draw order.
inline Matrix uniform_pool(const FeatureBounds& bounds, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix pool(n, bounds.ranges.size());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < bounds.ranges.size(); ++c) {
      std::uniform_real_distribution<double> u(bounds.ranges[c].first, bounds.ranges[c].second);
      pool(r, c) = bounds.ranges[c].first == bounds.ranges[c].second ? bounds.ranges[c].first : u(rng);
    }
  return pool;
}

/// Keeps the `keep_size` pool points closest to the decision boundary; ties keep draw order.
inline UsdbSample usdb_sample(const MlpModel& m, const UsdbConfig& cfg) {
  cfg.validate();
  if (m.head != Head::softmax) throw ConfigError("boundary sampling needs a softmax model");
  if (cfg.bounds.ranges.size() != m.input_dim()) throw DimensionError("bounds do not match model input width");

  const Matrix pool = uniform_pool(cfg.bounds, cfg.pool_size, cfg.seed);
  const Matrix probs = forward(m, pool);
  std::vector<double> d(pool.rows());
  for (std::size_t r = 0; r < pool.rows(); ++r) d[r] = boundary_distance(probs.row(r));

  std::vector<std::size_t> order(pool.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  order.resize(cfg.keep_size);

  UsdbSample out;
  out.points = select_rows(pool, order);
  out.probs = select_rows(probs, order);
  for (std::size_t i : order) out.distance.push_back(d[i]);
  out.pool_index = std::move(order);
  return out;
}

}  // namespace srnet
