#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srnet/errors.hpp"
#include "srnet/matrix.hpp"

namespace srnet {

enum class Head { linear, softmax };
enum class OptimizerKind { sgd, adam };

inline std::string to_string(Head h) { return h == Head::softmax ? "softmax" : "linear"; }
inline Head parse_head(const std::string& s) {
  if (s == "linear") return Head::linear;
  if (s == "softmax") return Head::softmax;
  throw ConfigError("unknown output head '" + s + "'");
}
inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd" || s == "s") return OptimizerKind::sgd;
  if (s == "adam" || s == "a") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct DenseLayer {
  Matrix W;  // out x in
  std::vector<double> b;

  [[nodiscard]] std::size_t in() const noexcept { return W.cols(); }
  [[nodiscard]] std::size_t out() const noexcept { return W.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Sigmoid hidden layers followed by a linear or softmax head.
struct MlpModel {
  std::vector<DenseLayer> layers;
  Head head = Head::linear;

  [[nodiscard]] std::size_t input_dim() const { return layers.front().in(); }
  [[nodiscard]] std::size_t output_dim() const { return layers.back().out(); }
  [[nodiscard]] std::size_t hidden_count() const { return layers.size() - 1; }

  /// [d_in, hidden..., d_out]
  [[nodiscard]] std::vector<std::size_t> arch() const {
    std::vector<std::size_t> a{input_dim()};
    for (const auto& l : layers) a.push_back(l.out());
    return a;
  }

  /// Widths of every modelled layer: hidden widths then the output width.
  [[nodiscard]] std::vector<std::size_t> layer_widths() const {
    std::vector<std::size_t> w;
    for (const auto& l : layers) w.push_back(l.out());
    return w;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.W.data().size() + l.b.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw DimensionError("model has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].b.size() != layers[i].out())
        throw DimensionError("layer " + std::to_string(i) + ": bias length does not match output width");
      if (i > 0 && layers[i].in() != layers[i - 1].out())
        throw DimensionError("layer " + std::to_string(i) + ": input width does not chain");
    }
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Per-layer activations captured on a batch of inputs.
struct LayerTrace {
  Matrix x;
  std::vector<Matrix> h;  // post-sigmoid hidden outputs
  Matrix y;               // head output (probabilities for softmax)

  /// Targets for each modelled layer: h_0 .. h_{n-1}, then y.
  [[nodiscard]] const Matrix& layer_target(std::size_t i) const { return i < h.size() ? h[i] : y; }
  [[nodiscard]] std::size_t layer_count() const noexcept { return h.size() + 1; }
  [[nodiscard]] std::size_t samples() const noexcept { return x.rows(); }
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Inputs and targets; classification targets are one-hot rows.
struct Dataset {
  Matrix X;
  Matrix Y;
  std::vector<std::string> feature_names;

  [[nodiscard]] std::size_t size() const noexcept { return X.rows(); }
};

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

inline void softmax_rows(Matrix& z) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) sum += (v = std::exp(v - mx));
    for (double& v : row) v /= sum;
  }
}

/// a * W^T + b
inline Matrix affine_forward(const DenseLayer& layer, const Matrix& a) {
  if (a.cols() != layer.in())
    throw DimensionError("input width " + std::to_string(a.cols()) + " does not match layer width " +
                         std::to_string(layer.in()));
  Matrix z(a.rows(), layer.out());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      auto w = layer.W.row(o);
      z(r, o) = std::inner_product(in.begin(), in.end(), w.begin(), 0.0) + layer.b[o];
    }
  }
  return z;
}

inline LayerTrace forward_trace(const MlpModel& m, const Matrix& X) {
  LayerTrace t;
  t.x = X;
  const Matrix* a = &t.x;
  for (std::size_t i = 0; i + 1 < m.layers.size(); ++i) {
    Matrix z = affine_forward(m.layers[i], *a);
    for (double& v : z.data()) v = sigmoid(v);
    t.h.push_back(std::move(z));
    a = &t.h.back();
  }
  t.y = affine_forward(m.layers.back(), *a);
  if (m.head == Head::softmax) softmax_rows(t.y);
  return t;
}

inline Matrix forward(const MlpModel& m, const Matrix& X) {
  Matrix a = X;
  for (std::size_t i = 0; i + 1 < m.layers.size(); ++i) {
    a = affine_forward(m.layers[i], a);
    for (double& v : a.data()) v = sigmoid(v);
  }
  a = affine_forward(m.layers.back(), a);
  if (m.head == Head::softmax) softmax_rows(a);
  return a;
}

/// Mean squared error over samples and outputs (linear head) or mean cross-entropy (softmax head).
inline double model_loss(const MlpModel& m, const Matrix& X, const Matrix& Y) {
  Matrix out = forward(m, X);
  if (out.rows() != Y.rows() || out.cols() != Y.cols()) throw DimensionError("target shape does not match model output");
  double loss = 0.0;
  if (m.head == Head::linear) {
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      const double r = out.data()[i] - Y.data()[i];
      loss += r * r;
    }
    return loss / static_cast<double>(out.data().size());
  }
  for (std::size_t i = 0; i < out.data().size(); ++i)
    if (Y.data()[i] != 0.0) loss -= Y.data()[i] * std::log(std::max(out.data()[i], 1e-300));
  return loss / static_cast<double>(out.rows());
}

/// Parameters flattened layer by layer as [W row-major, b].
inline std::vector<double> flatten(const MlpModel& m) {
  std::vector<double> p;
  p.reserve(m.parameter_count());
  for (const auto& l : m.layers) {
    p.insert(p.end(), l.W.data().begin(), l.W.data().end());
    p.insert(p.end(), l.b.begin(), l.b.end());
  }
  return p;
}

inline void unflatten(MlpModel& m, std::span<const double> p) {
  if (p.size() != m.parameter_count()) throw DimensionError("parameter vector length mismatch");
  std::size_t at = 0;
  for (auto& l : m.layers) {
    for (double& v : l.W.data()) v = p[at++];
    for (double& v : l.b) v = p[at++];
  }
}

/// Backpropagated loss gradient, flattened like `flatten`.
inline std::pair<double, std::vector<double>> loss_and_gradient(const MlpModel& m, const Matrix& X, const Matrix& Y) {
  const std::size_t n = X.rows();
  std::vector<Matrix> acts{X};
  for (std::size_t i = 0; i + 1 < m.layers.size(); ++i) {
    Matrix z = affine_forward(m.layers[i], acts.back());
    for (double& v : z.data()) v = sigmoid(v);
    acts.push_back(std::move(z));
  }
  Matrix out = affine_forward(m.layers.back(), acts.back());
  if (m.head == Head::softmax) softmax_rows(out);
  if (out.rows() != Y.rows() || out.cols() != Y.cols()) throw DimensionError("target shape does not match model output");

  double loss = 0.0;
  Matrix delta(out.rows(), out.cols());
  if (m.head == Head::linear) {
    const double scale = 1.0 / static_cast<double>(out.data().size());
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      const double r = out.data()[i] - Y.data()[i];
      loss += r * r * scale;
      delta.data()[i] = 2.0 * r * scale;
    }
  } else {
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      if (Y.data()[i] != 0.0) loss -= Y.data()[i] * std::log(std::max(out.data()[i], 1e-300)) * scale;
      delta.data()[i] = (out.data()[i] - Y.data()[i]) * scale;
    }
  }

  std::vector<std::vector<double>> grads(m.layers.size());
  for (std::size_t li = m.layers.size(); li-- > 0;) {
    const auto& layer = m.layers[li];
    const Matrix& a = acts[li];
    auto& g = grads[li];
    g.assign(layer.W.data().size() + layer.b.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t o = 0; o < layer.out(); ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        for (std::size_t i = 0; i < layer.in(); ++i) g[o * layer.in() + i] += d * a(r, i);
        g[layer.W.data().size() + o] += d;
      }
    if (li == 0) break;
    Matrix prev(n, layer.in());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < layer.in(); ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < layer.out(); ++o) s += delta(r, o) * layer.W(o, i);
        const double h = a(r, i);
        prev(r, i) = s * h * (1.0 - h);
      }
    delta = std::move(prev);
  }
  std::vector<double> flat;
  flat.reserve(m.parameter_count());
  for (auto& g : grads) flat.insert(flat.end(), g.begin(), g.end());
  return {loss, std::move(flat)};
}

/// Uniform +-1/sqrt(fan_in) initialisation.
inline MlpModel init_mlp(std::span<const std::size_t> arch, Head head, std::uint64_t seed) {
  if (arch.size() < 2) throw ConfigError("architecture needs an input and an output width");
  for (std::size_t w : arch)
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  std::mt19937_64 rng(seed);
  MlpModel m;
  m.head = head;
  for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch[i]));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l{Matrix(arch[i + 1], arch[i]), std::vector<double>(arch[i + 1])};
    for (double& v : l.W.data()) v = u(rng);
    for (double& v : l.b) v = u(rng);
    m.layers.push_back(std::move(l));
  }
  return m;
}

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;  // full training loss before epoch 1, then after each epoch
};

/// Minibatch training on `data`. `hidden` lists hidden widths; input/output widths come from the data.
inline TrainResult train(const Dataset& data, std::span<const std::size_t> hidden, Head head, const TrainConfig& cfg) {
  if (data.size() == 0) throw DataError("empty training set");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> arch{data.X.cols()};
  arch.insert(arch.end(), hidden.begin(), hidden.end());
  arch.push_back(data.Y.cols());

  TrainResult res;
  res.model = init_mlp(arch, head, cfg.seed);
  auto& m = res.model;
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<double> params = flatten(m);
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
  std::uint64_t step = 0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  res.epoch_loss.push_back(model_loss(m, data.X, data.Y));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      auto [loss, grad] = loss_and_gradient(m, select_rows(data.X, idx), select_rows(data.Y, idx));
      if (!std::isfinite(loss))
        throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      ++step;
      if (cfg.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
      } else {
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
          m1[i] = cfg.adam_beta1 * m1[i] + (1.0 - cfg.adam_beta1) * grad[i];
          m2[i] = cfg.adam_beta2 * m2[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
          params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.adam_eps);
        }
      }
      unflatten(m, params);
    }
    const double epoch_loss = model_loss(m, data.X, data.Y);
    if (!std::isfinite(epoch_loss))
      throw NumericError("training loss became non-finite after epoch " + std::to_string(epoch));
    res.epoch_loss.push_back(epoch_loss);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Weight files

inline constexpr int kWeightsVersion = 1;

inline nlohmann::ordered_json to_json(const MlpModel& m) {
  nlohmann::ordered_json j;
  j["version"] = kWeightsVersion;
  j["arch"] = m.arch();
  j["head"] = to_string(m.head);
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) {
    nlohmann::ordered_json lj;
    lj["W"] = l.W.data();
    lj["b"] = l.b;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline MlpModel mlp_from_json(const nlohmann::ordered_json& j) {
  try {
    if (!j.is_object()) throw SchemaError("weights file is not a JSON object");
    if (j.at("version").get<int>() != kWeightsVersion)
      throw SchemaError("unsupported weights version " + j.at("version").dump());
    const auto arch = j.at("arch").get<std::vector<std::size_t>>();
    const auto& layers = j.at("layers");
    if (arch.size() < 2 || layers.size() != arch.size() - 1) throw SchemaError("arch and layer count disagree");
    MlpModel m;
    m.head = parse_head(j.at("head").get<std::string>());
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
      auto W = layers.at(i).at("W").get<std::vector<double>>();
      auto b = layers.at(i).at("b").get<std::vector<double>>();
      if (W.size() != arch[i] * arch[i + 1] || b.size() != arch[i + 1])
        throw SchemaError("layer " + std::to_string(i) + ": parameter count does not match arch");
      m.layers.push_back({Matrix(arch[i + 1], arch[i], std::move(W)), std::move(b)});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed weights file: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
}

inline std::string weights_to_string(const MlpModel& m) { return to_json(m).dump(1) + "\n"; }

inline MlpModel weights_from_string(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("weights file is not valid JSON: ") + e.what());
  }
  return mlp_from_json(j);
}

inline void save_weights(const MlpModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << weights_to_string(m);
}

inline MlpModel load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return weights_from_string(ss.str());
}

}  // namespace srnet
