#pragma once

// Shared synthetic tasks for the unit tests and the acceptance binary.

#include <random>
#include <vector>

#include "srnet/evolve.hpp"
#include "srnet/mlp.hpp"
#include "srnet/nncgp.hpp"

namespace fixture {

using namespace srnet;

/// Default evolution grid with a single expression planted in the first row of the last
/// column, so output genes stay in the last column.
inline Genotype planted_cgp(std::size_t n_inputs, FunctionGene node, double constant = 1.0) {
  CgpConfig cfg{n_inputs, 10, 10, 1, 10, 1};
  Rng rng(n_inputs * 1000 + static_cast<std::size_t>(node.opcode));
  Genotype g = random_genotype(cfg, standard_functions(), rng);
  const std::size_t slot = 9 * cfg.n_rows;
  g.nodes[slot] = node;
  g.outputs = {cfg.n_sources() + slot};
  g.constants = {constant};
  return g;
}

/// Two-input, widths {3, 1}: f0 = x0 * x1, f1 = sin(h0_2), with fixed affines.
inline MnncgpGenotype planted_genotype() {
  MnncgpGenotype g;
  g.chromosomes.push_back({planted_cgp(2, {2, 0, 1}), AffineParams({0.5, -1.0, 2.0}, {0.1, 0.2, -0.3}), 0});
  g.chromosomes.push_back({planted_cgp(3, {6, 2, 0}), AffineParams({1.5}, {0.25}), 1});
  return g;
}

/// Trace whose hidden and output activations are produced by `g` itself.
inline LayerTrace trace_of(const MnncgpGenotype& g, const Matrix& x) {
  const auto sem = genotype_forward(g, x);
  LayerTrace t;
  t.x = x;
  for (std::size_t i = 0; i + 1 < sem.size(); ++i) t.h.push_back(sem[i].h_s);
  t.y = sem.back().h_s;
  return t;
}

inline Matrix uniform_inputs(std::size_t n, std::size_t d, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(n, d);
  for (double& v : x.data()) v = u(rng);
  return x;
}

/// Trace of a randomly initialised network on uniform inputs.
inline LayerTrace random_task(std::span<const std::size_t> arch, Head head, std::size_t n, std::uint64_t seed) {
  const auto m = init_mlp(arch, head, seed);
  return forward_trace(m, uniform_inputs(n, arch.front(), seed + 1, -2.0, 2.0));
}

}  // namespace fixture
