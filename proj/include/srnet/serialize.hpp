#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "srnet/cgp.hpp"
#include "srnet/errors.hpp"
#include "srnet/nncgp.hpp"

namespace srnet {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const Genotype& g) {
  ordered_json j;
  const auto& c = g.config;
  j["config"] = {{"n_inputs", c.n_inputs},   {"n_rows", c.n_rows},           {"n_cols", c.n_cols},
                 {"n_constants", c.n_constants}, {"levels_back", c.levels_back}, {"n_outputs", c.n_outputs}};
  std::vector<std::size_t> flat;
  flat.reserve(3 * g.nodes.size());
  for (const auto& n : g.nodes) {
    flat.push_back(static_cast<std::size_t>(n.opcode));
    flat.push_back(n.in_a);
    flat.push_back(n.in_b);
  }
  j["function_genes"] = flat;
  j["output_genes"] = g.outputs;
  j["constants"] = g.constants;
  return j;
}

inline Genotype genotype_from_json(const ordered_json& j) {
  try {
    Genotype g;
    const auto& c = j.at("config");
    g.config = {c.at("n_inputs").get<std::size_t>(),    c.at("n_rows").get<std::size_t>(),
                c.at("n_cols").get<std::size_t>(),      c.at("n_constants").get<std::size_t>(),
                c.at("levels_back").get<std::size_t>(), c.at("n_outputs").get<std::size_t>()};
    const auto flat = j.at("function_genes").get<std::vector<std::size_t>>();
    if (flat.size() % 3 != 0) throw SchemaError("function_genes length is not a multiple of 3");
    for (std::size_t i = 0; i < flat.size(); i += 3)
      g.nodes.push_back({static_cast<int>(flat[i]), flat[i + 1], flat[i + 2]});
    g.outputs = j.at("output_genes").get<std::vector<std::size_t>>();
    g.constants = j.at("constants").get<std::vector<double>>();
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed genotype: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("invalid genotype config: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const DataError& e) {
    throw SchemaError(std::string("invalid genotype: ") + e.what());
  }
}

inline ordered_json to_json(const MnncgpGenotype& g) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : g.chromosomes) {
    ordered_json j;
    j["cgp"] = to_json(c.cgp);
    j["w"] = c.affine.w;
    j["b"] = c.affine.b;
    j["layer_index"] = c.layer_index;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline MnncgpGenotype mnncgp_from_json(const ordered_json& j) {
  if (!j.is_array()) throw SchemaError("genotype file must hold a list of chromosomes");
  try {
    MnncgpGenotype g;
    for (const auto& cj : j) {
      NncgpChromosome c;
      c.cgp = genotype_from_json(cj.at("cgp"));
      c.affine = AffineParams(cj.at("w").get<std::vector<double>>(), cj.at("b").get<std::vector<double>>());
      c.layer_index = cj.at("layer_index").get<std::size_t>();
      if (c.cgp.config.n_outputs != 1) throw SchemaError("layer chromosomes must have exactly one output");
      g.chromosomes.push_back(std::move(c));
    }
    for (std::size_t i = 1; i < g.size(); ++i)
      if (g.chromosomes[i].input_width() != g.chromosomes[i - 1].output_width())
        throw SchemaError("layer " + std::to_string(i) + ": input width does not chain from the previous layer");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed genotype: ") + e.what());
  } catch (const DimensionError& e) {
    throw SchemaError(e.what());
  }
}

inline void save_mnncgp(const MnncgpGenotype& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << to_json(g).dump(1) << "\n";
}

inline MnncgpGenotype load_mnncgp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  ordered_json j;
  try {
    j = ordered_json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + " is not valid JSON: " + e.what());
  }
  return mnncgp_from_json(j);
}

}  // namespace srnet
