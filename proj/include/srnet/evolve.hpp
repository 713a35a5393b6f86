#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "srnet/cgp.hpp"
#include "srnet/mlp.hpp"
#include "srnet/nncgp.hpp"
#include "srnet/optfit.hpp"

namespace srnet {

enum class Task { regression, classification };

inline Task parse_task(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw ConfigError("unknown task '" + s + "'");
}
inline std::string to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }

/// Added to a layer loss when its expression produced a non-finite value.
inline constexpr double kOverflowPenalty = 1e12;

struct EvolveConfig {
  std::size_t lambda = 200;
  std::size_t max_generations = 5000;
  double mutation_prob = 0.4;
  double fitness_target = 1e-4;
  std::size_t lbfgs_cadence = 1;  // generations between L-BFGS refits; 1 = every generation
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  CgpConfig grid{1, 10, 10, 1, 10, 1};  // n_inputs is overridden per layer
  LbfgsOptions lbfgs{};

  static EvolveConfig defaults_for(Task task) {
    EvolveConfig c;
    c.lbfgs_cadence = task == Task::classification ? 50 : 1;
    return c;
  }

  void validate() const {
    if (lambda < 1) throw ConfigError("lambda must be >= 1");
    if (!(fitness_target > 0.0)) throw ConfigError("fitness target must be positive");
    if (mutation_prob < 0.0 || mutation_prob > 1.0) throw ConfigError("mutation probability must lie in [0, 1]");
    if (max_generations < 1) throw ConfigError("max_generations must be >= 1");
    grid.validate();
  }
};

struct FitnessReport {
  std::vector<double> per_layer_mse;  // hidden layers only
  double output_loss = 0.0;
  double total = 0.0;
  bool penalized = false;
};

/// What every chromosome position is fitted against.
struct LayerTargets {
  Matrix x;
  std::vector<Matrix> targets;  // hidden activations, then the output target
  std::vector<LossKind> kinds;

  [[nodiscard]] std::size_t layers() const noexcept { return targets.size(); }
  [[nodiscard]] std::size_t hidden() const noexcept { return targets.size() - 1; }
};

/// Classification output targets are the network's argmax labels, one-hot encoded.
inline LayerTargets make_targets(const LayerTrace& trace, Task task) {
  LayerTargets t;
  t.x = trace.x;
  for (const auto& h : trace.h) {
    t.targets.push_back(h);
    t.kinds.push_back(LossKind::mse);
  }
  if (task == Task::regression) {
    t.targets.push_back(trace.y);
    t.kinds.push_back(LossKind::mse);
  } else {
    Matrix onehot(trace.y.rows(), trace.y.cols(), 0.0);
    for (std::size_t r = 0; r < trace.y.rows(); ++r) {
      auto row = trace.y.row(r);
      onehot(r, static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())) = 1.0;
    }
    t.targets.push_back(std::move(onehot));
    t.kinds.push_back(LossKind::cross_entropy);
  }
  return t;
}

/// MSE averaged over samples and neurons.
inline double layer_mse(const Matrix& target, const Matrix& approx) {
  double s = 0.0;
  for (std::size_t i = 0; i < target.data().size(); ++i) {
    const double r = target.data()[i] - approx.data()[i];
    s += r * r;
  }
  return s / static_cast<double>(target.data().size());
}

inline double softmax_cross_entropy(const Matrix& onehot, const Matrix& logits) {
  double loss = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < z.size(); ++c)
      if (onehot(r, c) != 0.0) loss -= onehot(r, c) * (z[c] - lse);
  }
  return loss / static_cast<double>(logits.rows());
}

struct ChromosomeScore {
  double loss = 0.0;
  AffineParams affine;
  Matrix h_s;
  bool penalized = false;
};

/// Evaluates f on `input`, fits (or reuses) the affine wrapper and scores it against `target`.
inline ChromosomeScore score_chromosome(const NncgpChromosome& c, const Matrix& input, const Matrix& target,
                                        LossKind kind, bool refit, const LbfgsOptions& lbfgs,
                                        const FunctionSet& fs = standard_functions()) {
  ChromosomeScore s;
  std::vector<double> f = chromosome_f(c, input, fs);
  if (!all_finite(f)) {
    s.penalized = true;
    for (double& v : f)
      if (!std::isfinite(v)) v = 0.0;
  }
  FitProblem problem{std::move(f), target, kind};
  const bool uses_lbfgs = !(kind == LossKind::mse && target.cols() <= kNewtonMaxWidth);
  if (refit || !uses_lbfgs || c.affine.width() != target.cols()) {
    s.affine = fit_affine(problem, lbfgs).params;
  } else {
    s.affine = c.affine;
  }
  s.h_s = apply_affine(problem.f_values, s.affine);
  double raw = kind == LossKind::mse ? layer_mse(target, s.h_s) : softmax_cross_entropy(target, s.h_s);
  if (!std::isfinite(raw)) {
    s.penalized = true;
    raw = kOverflowPenalty;
  }
  s.loss = s.penalized ? raw + kOverflowPenalty : raw;
  return s;
}

struct FittedIndividual {
  MnncgpGenotype genotype;  // with freshly fitted affines
  FitnessReport report;
};

inline FittedIndividual fit_individual(const MnncgpGenotype& g, const LayerTargets& t, bool refit = true,
                                       const LbfgsOptions& lbfgs = {}) {
  if (g.size() != t.layers())
    throw DimensionError("genotype has " + std::to_string(g.size()) + " chromosomes, trace has " +
                         std::to_string(t.layers()) + " layers");
  FittedIndividual out{g, {}};
  Matrix input = t.x;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g.chromosomes[i];
    if (c.input_width() != input.cols())
      throw DimensionError("layer " + std::to_string(i) + ": chromosome input width " +
                           std::to_string(c.input_width()) + " does not match " + std::to_string(input.cols()));
    auto s = score_chromosome(c, input, t.targets[i], t.kinds[i], refit, lbfgs);
    out.genotype.chromosomes[i].affine = s.affine;
    out.report.penalized = out.report.penalized || s.penalized;
    if (i < t.hidden())
      out.report.per_layer_mse.push_back(s.loss);
    else
      out.report.output_loss = s.loss;
    input = std::move(s.h_s);
  }
  double mean_hidden = 0.0;
  for (double v : out.report.per_layer_mse) mean_hidden += v;
  if (!out.report.per_layer_mse.empty()) mean_hidden /= static_cast<double>(out.report.per_layer_mse.size());
  out.report.total = mean_hidden + out.report.output_loss;
  return out;
}

/// Losses of a genotype as stored, without refitting its affines.
inline FitnessReport stored_fitness(const MnncgpGenotype& g, const LayerTargets& t) {
  if (g.size() != t.layers())
    throw DimensionError("genotype has " + std::to_string(g.size()) + " chromosomes, trace has " +
                         std::to_string(t.layers()) + " layers");
  const auto sem = genotype_forward(g, t.x);
  FitnessReport r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool finite = all_finite(sem[i].f_values);
    r.penalized = r.penalized || !finite;
    double loss = t.kinds[i] == LossKind::mse ? layer_mse(t.targets[i], sem[i].h_s)
                                              : softmax_cross_entropy(t.targets[i], sem[i].h_s);
    if (!std::isfinite(loss)) loss = kOverflowPenalty;
    if (!finite) loss += kOverflowPenalty;
    if (i < t.hidden())
      r.per_layer_mse.push_back(loss);
    else
      r.output_loss = loss;
  }
  double mean_hidden = 0.0;
  for (double v : r.per_layer_mse) mean_hidden += v;
  if (!r.per_layer_mse.empty()) mean_hidden /= static_cast<double>(r.per_layer_mse.size());
  r.total = mean_hidden + r.output_loss;
  return r;
}

/// Mean hidden-layer MSE plus the output loss, with affines fitted layer by layer.
inline FitnessReport fitness(const MnncgpGenotype& g, const LayerTrace& trace, Task task) {
  return fit_individual(g, make_targets(trace, task)).report;
}

// ---------------------------------------------------------------------------
// Selection

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

struct SelectionResult {
  MnncgpGenotype super;
  FitnessReport report;
  double mean_total = 0.0;                  // mean over individuals of their per-position losses
  std::vector<std::size_t> chosen;          // population index picked at each position
  std::vector<std::vector<double>> losses;  // [position][individual]
};

struct SelectOptions {
  bool refit = true;
  std::size_t threads = 1;
  LbfgsOptions lbfgs{};
};

/// Builds the super individual position by position. At position i every individual's
/// chromosome is scored on the super prefix's output; the lowest loss wins, ties going
/// to the lowest population index.
inline SelectionResult select_super(const std::vector<MnncgpGenotype>& population, const LayerTargets& t,
                                    const SelectOptions& opt = {}) {
  if (population.empty()) throw ConfigError("empty population");
  const std::size_t L = population.front().size();
  for (const auto& g : population)
    if (g.size() != L) throw DimensionError("individuals disagree on chromosome count");
  if (L != t.layers())
    throw DimensionError("genotype has " + std::to_string(L) + " chromosomes, trace has " +
                         std::to_string(t.layers()) + " layers");

  SelectionResult res;
  std::vector<double> individual_total(population.size(), 0.0);
  Matrix input = t.x;
  std::vector<ChromosomeScore> scores(population.size());
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t k = 0; k < population.size(); ++k)
      if (population[k].chromosomes[i].input_width() != input.cols())
        throw DimensionError("layer " + std::to_string(i) + ": chromosome input width does not match");
    detail::parallel_for(population.size(), opt.threads, [&](std::size_t k) {
      scores[k] = score_chromosome(population[k].chromosomes[i], input, t.targets[i], t.kinds[i], opt.refit,
                                   opt.lbfgs);
    });
    std::size_t best = 0;
    std::vector<double> losses(population.size());
    for (std::size_t k = 0; k < population.size(); ++k) {
      losses[k] = scores[k].loss;
      if (scores[k].loss < scores[best].loss) best = k;
      const double weight = i < t.hidden() ? 1.0 / static_cast<double>(t.hidden()) : 1.0;
      individual_total[k] += weight * scores[k].loss;
    }
    auto chosen = population[best].chromosomes[i];
    chosen.affine = scores[best].affine;
    res.super.chromosomes.push_back(std::move(chosen));
    res.chosen.push_back(best);
    res.losses.push_back(std::move(losses));
    res.report.penalized = res.report.penalized || scores[best].penalized;
    if (i < t.hidden())
      res.report.per_layer_mse.push_back(scores[best].loss);
    else
      res.report.output_loss = scores[best].loss;
    input = std::move(scores[best].h_s);
  }
  double mean_hidden = 0.0;
  for (double v : res.report.per_layer_mse) mean_hidden += v;
  if (!res.report.per_layer_mse.empty()) mean_hidden /= static_cast<double>(res.report.per_layer_mse.size());
  res.report.total = mean_hidden + res.report.output_loss;
  double mean = 0.0;
  for (double v : individual_total) mean += v;
  res.mean_total = mean / static_cast<double>(population.size());
  return res;
}

inline MnncgpGenotype select_super(const std::vector<MnncgpGenotype>& population, const LayerTrace& trace, Task task) {
  return select_super(population, make_targets(trace, task)).super;
}

// ---------------------------------------------------------------------------
// Evolution loop

struct GenerationRecord {
  std::size_t generation = 0;
  double best_total = 0.0;
  double mean_total = 0.0;
  std::vector<double> layer_mse;
  double output_loss = 0.0;
  double elapsed_ms = 0.0;
};

struct ConvergenceLog {
  std::vector<GenerationRecord> records;

  static void write_header(std::ostream& os, std::size_t hidden, bool timing) {
    os << "generation,best_total,mean_total";
    for (std::size_t i = 0; i < hidden; ++i) os << ",layer" << i << "_mse";
    os << ",output_loss";
    if (timing) os << ",elapsed_ms";
    os << "\n";
  }

  static void write_row(std::ostream& os, const GenerationRecord& r, bool timing) {
    os << r.generation << "," << format_number(r.best_total) << "," << format_number(r.mean_total);
    for (double v : r.layer_mse) os << "," << format_number(v);
    os << "," << format_number(r.output_loss);
    if (timing) os << "," << format_number(r.elapsed_ms, 6);
    os << "\n";
  }

  /// Wall-clock time is only written when `timing` is set, so untimed logs are reproducible byte for byte.
  void write_csv(std::ostream& os, bool timing = false) const {
    write_header(os, records.empty() ? 0 : records.front().layer_mse.size(), timing);
    for (const auto& r : records) write_row(os, r, timing);
  }
};

struct EvolveResult {
  MnncgpGenotype best;
  FitnessReport report;
  ConvergenceLog log;
};

/// Deterministic per-(seed, generation, slot) stream so threading cannot change results.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(generation >> 32),
                    static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(slot >> 32)};
  return Rng(seq);
}

inline MnncgpGenotype mutate_genotype(const MnncgpGenotype& parent, double prob, Rng& rng,
                                      const FunctionSet& fs = standard_functions()) {
  MnncgpGenotype child = parent;
  for (auto& c : child.chromosomes) c.cgp = mutate(c.cgp, prob, rng, fs);
  return child;
}

using GenerationCallback =
    std::function<void(const GenerationRecord&, const MnncgpGenotype& parent, const FitnessReport&)>;

/// (1 + lambda) strategy over multi-chromosome genotypes. Each generation the offspring
/// (plus the parent, placed last) go through super-individual selection; the super
/// individual replaces the parent unless it is strictly worse.
inline EvolveResult evolve(const LayerTrace& trace, Task task, std::span<const std::size_t> widths,
                           const EvolveConfig& cfg, std::vector<MnncgpGenotype> initial = {},
                           const GenerationCallback& on_generation = {}) {
  cfg.validate();
  const LayerTargets targets = make_targets(trace, task);
  if (widths.size() != targets.layers())
    throw DimensionError("network has " + std::to_string(widths.size()) + " layers, trace has " +
                         std::to_string(targets.layers()));
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (targets.targets[i].cols() != widths[i])
      throw DimensionError("layer " + std::to_string(i) + ": trace width " +
                           std::to_string(targets.targets[i].cols()) + " does not match " +
                           std::to_string(widths[i]));

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<MnncgpGenotype> population = std::move(initial);
  for (std::size_t k = population.size(); k < cfg.lambda; ++k) {
    Rng rng = stream_rng(cfg.seed, 0, k);
    population.push_back(random_mnncgp(trace.x.cols(), widths, cfg.grid, standard_functions(), rng));
  }
  for (const auto& g : population) check_widths(g, trace.x.cols(), widths);

  std::optional<MnncgpGenotype> parent;
  FitnessReport parent_report;
  EvolveResult out;

  for (std::size_t gen = 0;; ++gen) {
    SelectOptions opt{cfg.lbfgs_cadence <= 1 || gen % cfg.lbfgs_cadence == 0, cfg.threads, cfg.lbfgs};
    if (parent) population.push_back(*parent);
    auto sel = select_super(population, targets, opt);
    if (!parent || sel.report.total <= parent_report.total) {
      parent = std::move(sel.super);
      parent_report = sel.report;
    }

    GenerationRecord rec;
    rec.generation = gen;
    rec.best_total = parent_report.total;
    rec.mean_total = sel.mean_total;
    rec.layer_mse = parent_report.per_layer_mse;
    rec.output_loss = parent_report.output_loss;
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.log.records.push_back(rec);
    if (on_generation) on_generation(rec, *parent, parent_report);

    if (parent_report.total <= cfg.fitness_target || gen + 1 >= cfg.max_generations) break;

    population.assign(cfg.lambda, MnncgpGenotype{});
    detail::parallel_for(cfg.lambda, cfg.threads, [&](std::size_t k) {
      Rng rng = stream_rng(cfg.seed, gen + 1, k);
      population[k] = mutate_genotype(*parent, cfg.mutation_prob, rng);
    });
  }
  out.best = std::move(*parent);
  out.report = parent_report;
  return out;
}

}  // namespace srnet
