#pragma once

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "srnet/cgp.hpp"
#include "srnet/evolve.hpp"
#include "srnet/nncgp.hpp"

namespace srnet {

/// Names of the inputs seen by chromosome `layer`: features for the first, h{layer-1}_j after.
inline std::vector<std::string> layer_input_names(const MnncgpGenotype& g, std::size_t layer,
                                                  const std::vector<std::string>& features) {
  if (layer == 0) {
    if (features.size() == g.chromosomes[0].input_width()) return features;
    return indexed_names("x", g.chromosomes[0].input_width());
  }
  return indexed_names("h" + std::to_string(layer - 1) + "_", g.chromosomes[layer].input_width());
}

inline std::string layer_expression(const MnncgpGenotype& g, std::size_t layer, const std::vector<std::string>& features,
                                    int digits = 0) {
  const auto& c = g.chromosomes.at(layer);
  return to_infix(decode(c.cgp).front(), layer_input_names(g, layer, features), c.cgp.constants,
                  standard_functions(), digits);
}

/// Whole-network expression for every output neuron, built by substituting each layer's
/// affine-wrapped expression into the next.
inline std::vector<std::string> composed_expressions(const MnncgpGenotype& g, const std::vector<std::string>& features,
                                                     int digits = 4) {
  std::vector<std::string> names =
      features.size() == g.chromosomes.at(0).input_width() ? features : indexed_names("x", g.chromosomes[0].input_width());
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g.chromosomes[i];
    const std::string f = to_infix(decode(c.cgp).front(), names, c.cgp.constants, standard_functions(), digits);
    outputs.clear();
    for (std::size_t j = 0; j < c.affine.width(); ++j)
      outputs.push_back("(" + format_number(c.affine.w[j], digits) + " * " + f + " + " +
                        format_number(c.affine.b[j], digits) + ")");
    names = outputs;
  }
  return outputs;
}

inline std::string format_vector(const std::vector<double>& v, int digits = 6) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i], digits);
  return s + "]";
}

/// Per-layer expressions with fitted w, b and losses, followed by the composed network.
inline void write_expression_report(std::ostream& os, const MnncgpGenotype& g, const FitnessReport& report,
                                    const std::vector<std::string>& features, int digits = 4) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool output = i + 1 == g.size();
    os << (output ? "output layer" : "hidden layer " + std::to_string(i)) << ": f" << i << " = "
       << layer_expression(g, i, features, digits) << "\n";
    os << "  w = " << format_vector(g.chromosomes[i].affine.w) << "\n";
    os << "  b = " << format_vector(g.chromosomes[i].affine.b) << "\n";
    const double loss = output ? report.output_loss
                               : (i < report.per_layer_mse.size() ? report.per_layer_mse[i] : 0.0);
    os << "  loss = " << format_number(loss, 6) << "\n";
  }
  os << "total fitness = " << format_number(report.total, 6) << "\n";
  os << "whole network:\n";
  const auto whole = composed_expressions(g, features, digits);
  for (std::size_t j = 0; j < whole.size(); ++j) os << "  y" << j << " = " << whole[j] << "\n";
}

inline std::string expression_report(const MnncgpGenotype& g, const FitnessReport& report,
                                     const std::vector<std::string>& features, int digits = 4) {
  std::ostringstream os;
  write_expression_report(os, g, report, features, digits);
  return os.str();
}

}  // namespace srnet
