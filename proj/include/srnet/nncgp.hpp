#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "srnet/cgp.hpp"
#include "srnet/matrix.hpp"

namespace srnet {

/// Per-neuron scale and offset wrapped around a layer's scalar expression.
struct AffineParams {
  std::vector<double> w;
  std::vector<double> b;

  AffineParams() = default;
  AffineParams(std::vector<double> w_, std::vector<double> b_) : w(std::move(w_)), b(std::move(b_)) {
    if (w.size() != b.size()) throw DimensionError("affine weight and bias lengths differ");
  }
  static AffineParams identity(std::size_t width) { return {std::vector<double>(width, 1.0), std::vector<double>(width, 0.0)}; }

  [[nodiscard]] std::size_t width() const noexcept { return w.size(); }

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

/// One layer: a single-output CGP expression f and the affine wrapper w * f + b.
struct NncgpChromosome {
  Genotype cgp;
  AffineParams affine;
  std::size_t layer_index = 0;

  [[nodiscard]] std::size_t input_width() const noexcept { return cgp.config.n_inputs; }
  [[nodiscard]] std::size_t output_width() const noexcept { return affine.width(); }

  friend bool operator==(const NncgpChromosome&, const NncgpChromosome&) = default;
};

/// Chromosome i consumes the affine output of chromosome i - 1; the last one models the network output.
struct MnncgpGenotype {
  std::vector<NncgpChromosome> chromosomes;

  [[nodiscard]] std::size_t size() const noexcept { return chromosomes.size(); }

  friend bool operator==(const MnncgpGenotype&, const MnncgpGenotype&) = default;
};

struct LayerSemantics {
  std::vector<double> f_values;
  Matrix h_s;
};

inline Matrix apply_affine(std::span<const double> f, const AffineParams& affine) {
  Matrix h(f.size(), affine.width());
  for (std::size_t k = 0; k < f.size(); ++k)
    for (std::size_t j = 0; j < affine.width(); ++j) h(k, j) = affine.w[j] * f[k] + affine.b[j];
  return h;
}

inline std::vector<double> chromosome_f(const NncgpChromosome& c, const Matrix& inputs,
                                        const FunctionSet& fs = standard_functions()) {
  return evaluate_graph(c.cgp, inputs, 0, fs);
}

inline LayerSemantics chromosome_forward(const NncgpChromosome& c, const Matrix& inputs,
                                         const FunctionSet& fs = standard_functions()) {
  LayerSemantics out;
  out.f_values = chromosome_f(c, inputs, fs);
  out.h_s = apply_affine(out.f_values, c.affine);
  return out;
}

/// Forward pass through every chromosome; the last entry holds y^s.
inline std::vector<LayerSemantics> genotype_forward(const MnncgpGenotype& g, const Matrix& x,
                                                    const FunctionSet& fs = standard_functions()) {
  std::vector<LayerSemantics> layers;
  layers.reserve(g.size());
  const Matrix* input = &x;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g.chromosomes[i];
    if (input->cols() != c.input_width())
      throw DimensionError("layer " + std::to_string(i) + ": input width " + std::to_string(input->cols()) +
                           " does not match chromosome input width " + std::to_string(c.input_width()));
    layers.push_back(chromosome_forward(c, *input, fs));
    input = &layers.back().h_s;
  }
  return layers;
}

/// Checks the width chain x -> widths[0] -> ... -> widths.back().
inline void check_widths(const MnncgpGenotype& g, std::size_t input_dim, std::span<const std::size_t> widths) {
  if (g.size() != widths.size())
    throw DimensionError("genotype has " + std::to_string(g.size()) + " chromosomes, network has " +
                         std::to_string(widths.size()) + " layers");
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g.chromosomes[i];
    if (c.input_width() != in)
      throw DimensionError("layer " + std::to_string(i) + ": chromosome input width " +
                           std::to_string(c.input_width()) + ", expected " + std::to_string(in));
    if (c.output_width() != widths[i])
      throw DimensionError("layer " + std::to_string(i) + ": affine width " + std::to_string(c.output_width()) +
                           ", expected " + std::to_string(widths[i]));
    in = widths[i];
  }
}

/// Random chromosomes for a network with the given input dimension and layer widths.
/// `grid` supplies rows/cols/constants/levels_back; n_inputs is set per layer.
inline MnncgpGenotype random_mnncgp(std::size_t input_dim, std::span<const std::size_t> widths, CgpConfig grid,
                                    const FunctionSet& fs, Rng& rng) {
  MnncgpGenotype g;
  std::size_t in = input_dim;
  grid.n_outputs = 1;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    grid.n_inputs = in;
    g.chromosomes.push_back({random_genotype(grid, fs, rng), AffineParams::identity(widths[i]), i});
    in = widths[i];
  }
  return g;
}

}  // namespace srnet
