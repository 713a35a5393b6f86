// srnet command-line driver: train MLPs, explain them with evolved expressions,
// sample decision boundaries and evaluate extracted expressions.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srnet/srnet.hpp"

namespace fs = std::filesystem;
using namespace srnet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::size_t threads = 1;
  std::string out = "out";
  std::string weights;
  std::string data;
  std::string genotype;
  std::size_t pool = 0;
  std::size_t keep = 0;
  std::size_t points = 0;
  bool timing = false;
};

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Records what a command read and wrote so the run can be repeated.
class Manifest {
 public:
  Manifest(std::string command, const KeyValueConfig& cfg, const Common& c) {
    j_["command"] = std::move(command);
    j_["started"] = iso_now();
    j_["config_path"] = c.config_path;
    j_["config"] = cfg.values();
    j_["seeds"] = nlohmann::ordered_json::array();
    j_["artifacts"] = nlohmann::ordered_json::array();
  }
  void seed(std::uint64_t s) { j_["seeds"].push_back(s); }
  void artifact(const fs::path& p) { j_["artifacts"].push_back(p.string()); }
  void set(const std::string& key, nlohmann::ordered_json v) { j_[key] = std::move(v); }
  void write(const fs::path& dir) {
    j_["finished"] = iso_now();
    const fs::path p = dir / "manifest.json";
    std::ofstream os(p);
    if (!os) throw DataError("cannot write " + p.string());
    os << j_.dump(1) << "\n";
  }

 private:
  nlohmann::ordered_json j_;
};

KeyValueConfig load_config(const Common& c) {
  return c.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config_path);
}

std::uint64_t require_seed(const Common& c) {
  if (!c.seed) throw ConfigError("this command needs an explicit --seed");
  return *c.seed;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

Task task_of(const KeyValueConfig& cfg) { return parse_task(cfg.get("task", "regression")); }

std::optional<BenchmarkSpec> benchmark_of(const KeyValueConfig& cfg) {
  if (!cfg.has("benchmark")) return std::nullopt;
  return benchmark(cfg.require("benchmark"));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << text;
}

/// Leading `cols` feature columns of a CSV; extra columns (targets, probabilities) are ignored.
Matrix read_features(const std::string& path, std::size_t cols, std::vector<std::string>* names = nullptr) {
  const auto t = read_csv(path);
  if (t.header.size() < cols)
    throw DataError(path + ": expected at least " + std::to_string(cols) + " feature columns, found " +
                    std::to_string(t.header.size()));
  Matrix X(t.values.rows(), cols);
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) X(r, c) = t.values(r, c);
  if (names) names->assign(t.header.begin(), t.header.begin() + static_cast<std::ptrdiff_t>(cols));
  if (X.rows() < 2) throw DataError(path + ": need at least two samples");
  return X;
}

EvolveConfig evolve_config(const KeyValueConfig& cfg, Task task) {
  auto e = EvolveConfig::defaults_for(task);
  e.lambda = cfg.get_uint("evolve.lambda", e.lambda);
  e.max_generations = cfg.get_uint("evolve.max_generations", e.max_generations);
  e.mutation_prob = cfg.get_double("evolve.mutation_prob", e.mutation_prob);
  e.fitness_target = cfg.get_double("evolve.fitness_target", e.fitness_target);
  e.lbfgs_cadence = cfg.get_uint("evolve.lbfgs_cadence", e.lbfgs_cadence);
  e.grid.n_rows = cfg.get_uint("evolve.rows", e.grid.n_rows);
  e.grid.n_cols = cfg.get_uint("evolve.cols", e.grid.n_cols);
  e.grid.n_constants = cfg.get_uint("evolve.constants", e.grid.n_constants);
  e.grid.levels_back = cfg.get_uint("evolve.levels_back", e.grid.n_cols);
  e.validate();
  return e;
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c) {
  const auto cfg = load_config(c);
  const std::uint64_t seed = require_seed(c);
  const Task task = task_of(cfg);
  const auto bench = benchmark_of(cfg);
  const fs::path out = ensure_dir(c.out);
  Manifest manifest("train", cfg, c);
  manifest.seed(seed);

  Dataset data;
  std::vector<std::size_t> hidden;
  TrainConfig tc;
  if (bench) {
    if (task != Task::regression) throw ConfigError("benchmarks are regression tasks");
    data = generate(*bench, seed);
    hidden = bench->hidden;
    tc = default_train_config(*bench, seed);
  } else {
    const std::string path = c.data.empty() ? cfg.get("data", "") : c.data;
    if (path.empty()) throw ConfigError("config names neither a benchmark nor a data CSV");
    data = read_dataset(path, task == Task::classification, cfg.get_uint("targets", 1), cfg.get_uint("classes", 0));
    manifest.set("data", path);
    tc.seed = seed;
  }
  hidden = cfg.get_sizes("hidden", hidden);
  if (hidden.empty()) throw ConfigError("config must give hidden layer widths");
  tc.optimizer = parse_optimizer(cfg.get("optimizer", tc.optimizer == OptimizerKind::adam ? "adam" : "sgd"));
  tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
  tc.epochs = cfg.get_uint("epochs", tc.epochs);
  tc.batch_size = cfg.get_uint("batch_size", tc.batch_size);

  const auto sp = split(data, cfg.get_double("train_fraction", 0.8), seed);
  const Head head = task == Task::classification ? Head::softmax : Head::linear;
  const auto result = train(sp.train, hidden, head, tc);
  const double train_loss = model_loss(result.model, sp.train.X, sp.train.Y);
  const double test_loss = model_loss(result.model, sp.test.X, sp.test.Y);
  if (!std::isfinite(train_loss) || !std::isfinite(test_loss)) throw NumericError("training produced a non-finite loss");

  const fs::path weights = c.weights.empty() ? out / "weights.json" : fs::path(c.weights);
  save_weights(result.model, weights.string());
  manifest.artifact(weights);
  for (const auto& [name, part] : {std::pair{"train.csv", &sp.train}, std::pair{"test.csv", &sp.test}}) {
    std::ofstream os(out / name);
    write_dataset(os, *part, task == Task::classification);
    manifest.artifact(out / name);
  }
  std::ofstream loss_csv(out / "train_loss.csv");
  loss_csv << "epoch,loss\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) loss_csv << e << "," << format_number(result.epoch_loss[e]) << "\n";
  manifest.artifact(out / "train_loss.csv");

  nlohmann::ordered_json metrics{{"train_loss", train_loss}, {"test_loss", test_loss}, {"epochs", tc.epochs}};
  manifest.set("metrics", metrics);
  manifest.write(out);
  std::cout << "arch " << nlohmann::json(result.model.arch()).dump() << " head " << to_string(head) << "\n"
            << "train loss " << format_number(train_loss, 6) << "\n"
            << "test loss " << format_number(test_loss, 6) << "\n"
            << "weights " << weights.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_explain(const Common& c) {
  const auto cfg = load_config(c);
  const std::uint64_t seed = require_seed(c);
  const fs::path out = ensure_dir(c.out);
  const std::string weights_path = c.weights.empty() ? (out / "weights.json").string() : c.weights;
  const auto model = load_weights(weights_path);
  const Task task = model.head == Head::softmax ? Task::classification : Task::regression;
  const std::string data_path = c.data.empty() ? (out / "train.csv").string() : c.data;
  std::vector<std::string> names;
  const Matrix X = read_features(data_path, model.input_dim(), &names);
  const auto trace = forward_trace(model, X);
  const auto widths = model.layer_widths();
  auto ecfg = evolve_config(cfg, task);
  ecfg.threads = c.threads;

  Manifest manifest("explain", cfg, c);
  manifest.set("weights", weights_path);
  manifest.set("data", data_path);
  const auto targets = make_targets(trace, task);

  std::ofstream summary(out / "summary.csv");
  summary << "run,seed,generations,total";
  for (std::size_t i = 0; i < targets.hidden(); ++i) summary << ",layer" << i << "_mse";
  summary << ",output_loss\n";
  std::vector<FitnessReport> finals;
  for (std::size_t r = 0; r < c.runs; ++r) {
    ecfg.seed = seed + r;
    manifest.seed(ecfg.seed);
    const fs::path dir = ensure_dir((out / ("run" + std::to_string(r))).string());
    std::ofstream log(dir / "convergence.csv");
    ConvergenceLog::write_header(log, targets.hidden(), c.timing);
    const auto result = evolve(trace, task, widths, ecfg, {},
                               [&](const GenerationRecord& rec, const MnncgpGenotype&, const FitnessReport&) {
                                 ConvergenceLog::write_row(log, rec, c.timing);
                                 log.flush();
                               });
    save_mnncgp(result.best, (dir / "genotype.json").string());
    write_text(dir / "report.txt", expression_report(result.best, result.report, names));
    for (const char* f : {"convergence.csv", "genotype.json", "report.txt"}) manifest.artifact(dir / f);
    summary << r << "," << ecfg.seed << "," << result.log.records.size() << "," << format_number(result.report.total);
    for (double v : result.report.per_layer_mse) summary << "," << format_number(v);
    summary << "," << format_number(result.report.output_loss) << "\n";
    finals.push_back(result.report);
    std::cout << "run " << r << " seed " << ecfg.seed << ": total " << format_number(result.report.total, 6) << " after "
              << result.log.records.size() << " generations\n";
  }
  manifest.artifact(out / "summary.csv");

  auto best_mean = [&](auto get) {
    double best = std::numeric_limits<double>::infinity(), mean = 0.0;
    for (const auto& f : finals) {
      best = std::min(best, get(f));
      mean += get(f);
    }
    return std::pair{best, mean / static_cast<double>(finals.size())};
  };
  for (std::size_t i = 0; i < targets.hidden(); ++i) {
    auto [b, m] = best_mean([i](const FitnessReport& f) { return f.per_layer_mse[i]; });
    std::cout << "layer " << i << " mse: best " << format_number(b, 6) << " mean " << format_number(m, 6) << "\n";
  }
  auto [ob, om] = best_mean([](const FitnessReport& f) { return f.output_loss; });
  std::cout << "output loss: best " << format_number(ob, 6) << " mean " << format_number(om, 6) << "\n";
  auto [tb, tm] = best_mean([](const FitnessReport& f) { return f.total; });
  std::cout << "total: best " << format_number(tb, 6) << " mean " << format_number(tm, 6) << "\n";
  manifest.write(out);
  return 0;
}

// ---------------------------------------------------------------------------

FeatureBounds bounds_for(const KeyValueConfig& cfg, const Common& c, std::size_t dim, std::vector<std::string>* names) {
  if (!c.data.empty()) {
    const Matrix X = read_features(c.data, dim, names);
    return FeatureBounds::from_data(X, cfg.get_double("usdb.margin", 0.0));
  }
  if (const auto bench = benchmark_of(cfg)) {
    if (bench->dim() != dim) throw DataError("benchmark dimension does not match the model input");
    FeatureBounds b;
    for (const auto& v : bench->variables) {
      b.ranges.emplace_back(v.lo, v.hi);
      if (names) names->push_back(v.name);
    }
    return b;
  }
  throw ConfigError("need --data or a benchmark in the config to determine feature bounds");
}

int cmd_sample_boundary(const Common& c) {
  const auto cfg = load_config(c);
  const std::uint64_t seed = require_seed(c);
  const fs::path out = ensure_dir(c.out);
  const std::string weights_path = c.weights.empty() ? (out / "weights.json").string() : c.weights;
  const auto model = load_weights(weights_path);
  std::vector<std::string> names;
  UsdbConfig u;
  u.bounds = bounds_for(cfg, c, model.input_dim(), &names);
  u.pool_size = c.pool ? c.pool : cfg.get_uint("usdb.pool_size", u.pool_size);
  u.keep_size = c.keep ? c.keep : cfg.get_uint("usdb.keep_size", u.keep_size);
  u.seed = seed;
  const auto s = usdb_sample(model, u);

  if (names.size() != model.input_dim()) names = indexed_names("x", model.input_dim());
  std::vector<std::string> header = names;
  for (std::size_t k = 0; k < model.output_dim(); ++k) header.push_back("p_" + std::to_string(k));
  header.push_back("d");
  Matrix all(s.points.rows(), header.size());
  for (std::size_t r = 0; r < all.rows(); ++r) {
    std::size_t col = 0;
    for (double v : s.points.row(r)) all(r, col++) = v;
    for (double v : s.probs.row(r)) all(r, col++) = v;
    all(r, col) = s.distance[r];
  }
  const fs::path path = out / "boundary_samples.csv";
  std::ofstream os(path);
  write_csv(os, header, all);
  Manifest manifest("sample-boundary", cfg, c);
  manifest.seed(seed);
  manifest.set("weights", weights_path);
  manifest.set("pool_size", u.pool_size);
  manifest.set("keep_size", u.keep_size);
  manifest.artifact(path);
  manifest.write(out);
  std::cout << "kept " << s.points.rows() << " of " << u.pool_size << " points, max distance "
            << format_number(s.distance.empty() ? 0.0 : s.distance.back(), 6) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

Matrix domain_points(const FeatureBounds& b, double scale, std::size_t n, std::optional<std::uint64_t> seed) {
  FeatureBounds wide;
  for (const auto& [lo, hi] : b.ranges) {
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo) * scale;
    wide.ranges.emplace_back(mid - half, mid + half);
  }
  if (wide.ranges.size() == 1) {
    Matrix X(n, 1);
    const auto [lo, hi] = wide.ranges[0];
    for (std::size_t i = 0; i < n; ++i)
      X(i, 0) = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return X;
  }
  if (!seed) throw ConfigError("multi-dimensional evaluation draws random points and needs --seed");
  return uniform_pool(wide, n, *seed);
}

void write_eval_csv(const fs::path& path, const Matrix& X, const std::vector<std::string>& names, const MlpModel& m,
                    const MnncgpGenotype& g, const std::optional<BenchmarkSpec>& bench) {
  const Matrix y_nn = forward(m, X);
  Matrix y_sr = genotype_forward(g, X).back().h_s;
  if (m.head == Head::softmax) softmax_rows(y_sr);
  std::vector<std::string> header = names;
  const std::size_t k = y_nn.cols();
  for (std::size_t j = 0; j < k; ++j) header.push_back(k == 1 ? "y_nn" : "y_nn_" + std::to_string(j));
  for (std::size_t j = 0; j < k; ++j) header.push_back(k == 1 ? "y_srnet" : "y_srnet_" + std::to_string(j));
  if (bench) header.push_back("y_true");
  Matrix all(X.rows(), header.size());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    std::size_t col = 0;
    for (double v : X.row(r)) all(r, col++) = v;
    for (double v : y_nn.row(r)) all(r, col++) = v;
    for (double v : y_sr.row(r)) all(r, col++) = v;
    if (bench) all(r, col) = (*bench)(X.row(r));
  }
  std::ofstream os(path);
  write_csv(os, header, all);
}

int cmd_eval(const Common& c) {
  const auto cfg = load_config(c);
  const fs::path out = ensure_dir(c.out);
  const auto model = load_weights(c.weights.empty() ? (out / "weights.json").string() : c.weights);
  const std::string gpath = c.genotype.empty() ? (out / "run0" / "genotype.json").string() : c.genotype;
  const auto g = load_mnncgp(gpath);
  check_widths(g, model.input_dim(), model.layer_widths());
  const auto bench = benchmark_of(cfg);
  std::vector<std::string> names;
  const FeatureBounds b = bounds_for(cfg, c, model.input_dim(), &names);
  if (names.size() != model.input_dim()) names = indexed_names("x", model.input_dim());
  const std::size_t n = c.points ? c.points : cfg.get_uint("eval.points", 200);

  Manifest manifest("eval", cfg, c);
  manifest.set("genotype", gpath);
  if (c.seed) manifest.seed(*c.seed);
  std::optional<std::uint64_t> seed2;
  if (c.seed) seed2 = *c.seed + 1;
  write_eval_csv(out / "interpolation.csv", domain_points(b, 1.0, n, c.seed), names, model, g, bench);
  write_eval_csv(out / "extrapolation.csv", domain_points(b, 5.0, n, seed2), names, model, g, bench);
  manifest.artifact(out / "interpolation.csv");
  manifest.artifact(out / "extrapolation.csv");
  manifest.write(out);
  std::cout << "wrote " << n << " interpolation and " << n << " extrapolation points to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_report(const Common& c) {
  const auto cfg = load_config(c);
  const fs::path out = ensure_dir(c.out);
  const auto model = load_weights(c.weights.empty() ? (out / "weights.json").string() : c.weights);
  const Task task = model.head == Head::softmax ? Task::classification : Task::regression;
  const std::string gpath = c.genotype.empty() ? (out / "run0" / "genotype.json").string() : c.genotype;
  const auto g = load_mnncgp(gpath);
  const std::string data_path = c.data.empty() ? (out / "train.csv").string() : c.data;
  std::vector<std::string> names;
  const Matrix X = read_features(data_path, model.input_dim(), &names);
  const auto targets = make_targets(forward_trace(model, X), task);
  const auto report = stored_fitness(g, targets);
  const std::string text = expression_report(g, report, names);
  write_text(out / "expressions.txt", text);
  std::cout << text;

  // Per-layer activations side by side, the raw data behind hidden-layer heat maps.
  Manifest manifest("report", cfg, c);
  manifest.set("genotype", gpath);
  manifest.artifact(out / "expressions.txt");
  const auto sem = genotype_forward(g, X);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Matrix& h = targets.targets[i];
    std::vector<std::string> header{"sample"};
    for (std::size_t j = 0; j < h.cols(); ++j) header.push_back("nn_" + std::to_string(j));
    for (std::size_t j = 0; j < h.cols(); ++j) header.push_back("srnet_" + std::to_string(j));
    Matrix all(h.rows(), header.size());
    for (std::size_t r = 0; r < h.rows(); ++r) {
      all(r, 0) = static_cast<double>(r);
      for (std::size_t j = 0; j < h.cols(); ++j) {
        all(r, 1 + j) = h(r, j);
        all(r, 1 + h.cols() + j) = sem[i].h_s(r, j);
      }
    }
    const fs::path p = out / ("layer" + std::to_string(i) + "_activations.csv");
    std::ofstream os(p);
    write_csv(os, header, all);
    manifest.artifact(p);
  }
  manifest.write(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srnet: explain multilayer perceptrons layer by layer with evolved expressions"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "key = value experiment file");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--weights", c.weights, "MLP weights JSON");
    sub->add_option("--data", c.data, "dataset CSV");
  };

  auto* train = app.add_subcommand("train", "train an MLP on a benchmark or CSV dataset");
  add_common(train);
  auto* explain = app.add_subcommand("explain", "evolve per-layer expressions for a trained MLP");
  add_common(explain);
  explain->add_option("--runs", c.runs, "independent seeded runs")->check(CLI::PositiveNumber);
  explain->add_flag("--timing", c.timing, "add wall-clock column to convergence logs");
  auto* sample = app.add_subcommand("sample-boundary", "draw points near a classifier's decision boundary");
  add_common(sample);
  sample->add_option("--n", c.pool, "candidate pool size");
  sample->add_option("--s", c.keep, "points kept");
  auto* eval = app.add_subcommand("eval", "compare MLP and expressions on interpolation and extrapolation domains");
  add_common(eval);
  eval->add_option("--genotype", c.genotype, "evolved genotype JSON");
  eval->add_option("--points", c.points, "points per domain");
  auto* report = app.add_subcommand("report", "print per-layer expressions and activation tables");
  add_common(report);
  report->add_option("--genotype", c.genotype, "evolved genotype JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(c);
    if (*explain) return cmd_explain(c);
    if (*sample) return cmd_sample_boundary(c);
    if (*eval) return cmd_eval(c);
    if (*report) return cmd_report(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
