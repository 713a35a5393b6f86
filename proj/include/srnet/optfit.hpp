#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "srnet/errors.hpp"
#include "srnet/matrix.hpp"
#include "srnet/nncgp.hpp"

namespace srnet {

enum class LossKind { mse, cross_entropy };

/// Fit w, b so that w_j * f + b_j matches targets[:, j].
///
/// Loss conventions: MSE is the mean over samples of the squared error summed
/// over neurons. Cross-entropy treats w_c * f + b_c as class logits, applies
/// softmax and averages -sum_c t_c log p_c over samples.
struct FitProblem {
  std::vector<double> f_values;
  Matrix targets;
  LossKind loss = LossKind::mse;

  [[nodiscard]] std::size_t samples() const noexcept { return f_values.size(); }
  [[nodiscard]] std::size_t width() const noexcept { return targets.cols(); }

  void validate() const {
    if (f_values.size() != targets.rows()) throw DimensionError("f_values and targets disagree on sample count");
    if (f_values.size() < 2) throw DataError("affine fit needs at least two samples");
    if (!all_finite(targets.data())) throw NumericError("non-finite fit targets");
    if (!all_finite(f_values)) throw NumericError("non-finite expression values");
  }
};

struct FitResult {
  AffineParams params;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate = false;           // f had zero variance on at least one neuron
  std::vector<double> loss_history;  // loss before each iteration, then the final loss
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // [dL/dw_0 .. dL/dw_{m-1}, dL/db_0 .. dL/db_{m-1}]
};

inline LossGrad loss_and_grad(const AffineParams& params, const FitProblem& p) {
  const std::size_t n = p.samples();
  const std::size_t m = p.width();
  if (params.width() != m) throw DimensionError("affine width does not match target width");
  LossGrad out;
  out.grad.assign(2 * m, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  if (p.loss == LossKind::mse) {
    for (std::size_t k = 0; k < n; ++k) {
      const double f = p.f_values[k];
      for (std::size_t j = 0; j < m; ++j) {
        const double r = params.w[j] * f + params.b[j] - p.targets(k, j);
        out.loss += r * r;
        out.grad[j] += 2.0 * r * f;
        out.grad[m + j] += 2.0 * r;
      }
    }
  } else {
    std::vector<double> z(m);
    for (std::size_t k = 0; k < n; ++k) {
      const double f = p.f_values[k];
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < m; ++c) {
        z[c] = params.w[c] * f + params.b[c];
        zmax = std::max(zmax, z[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < m; ++c) sum += std::exp(z[c] - zmax);
      const double log_sum = zmax + std::log(sum);
      double t_total = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double t = p.targets(k, c);
        t_total += t;
        if (t != 0.0) out.loss -= t * (z[c] - log_sum);
      }
      for (std::size_t c = 0; c < m; ++c) {
        const double dz = std::exp(z[c] - log_sum) * t_total - p.targets(k, c);
        out.grad[c] += dz * f;
        out.grad[m + c] += dz;
      }
    }
  }
  out.loss *= inv_n;
  for (double& g : out.grad) g *= inv_n;
  return out;
}

inline double fit_loss(const AffineParams& params, const FitProblem& p) { return loss_and_grad(params, p).loss; }

namespace detail {

struct CenteredStats {
  double mean = 0.0;
  double sdd = 0.0;  // sum of squared deviations
  double sff = 0.0;  // sum of squares
};

inline CenteredStats centered_stats(std::span<const double> f) {
  CenteredStats s;
  for (double v : f) s.mean += v;
  s.mean /= static_cast<double>(f.size());
  for (double v : f) {
    s.sdd += (v - s.mean) * (v - s.mean);
    s.sff += v * v;
  }
  return s;
}

inline bool is_degenerate(const CenteredStats& s) { return s.sdd == 0.0 || s.sdd <= 1e-20 * s.sff; }

}  // namespace detail

/// One Newton-Raphson update p <- p - H^{-1} grad on the MSE loss, neuron by neuron.
/// The loss is quadratic in (w_j, b_j), so a single step lands on the optimum.
inline AffineParams newton_step(const AffineParams& start, const FitProblem& p, bool* degenerate = nullptr) {
  if (p.loss != LossKind::mse) throw ConfigError("Newton fit requires the MSE loss");
  p.validate();
  const std::size_t n = p.samples();
  const std::size_t m = p.width();
  const double dn = static_cast<double>(n);
  const auto stats = detail::centered_stats(p.f_values);
  const bool flat = detail::is_degenerate(stats);
  if (degenerate) *degenerate = flat;

  AffineParams next = start;
  if (flat) {
    for (std::size_t j = 0; j < m; ++j) {
      double mean_t = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean_t += p.targets(k, j);
      next.w[j] = 0.0;
      next.b[j] = mean_t / dn;
    }
    return next;
  }

  // Same step H^{-1} grad, taken in the coordinates (w, b + w * mean(f)) where H is
  // diagonal. Solving the raw [[sff, sf], [sf, n]] system loses most digits when f
  // is nearly constant.
  for (std::size_t j = 0; j < m; ++j) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = start.w[j] * p.f_values[k] + start.b[j] - p.targets(k, j);
      gw += (p.f_values[k] - stats.mean) * e;
      gb += e;
    }
    const double step_w = gw / stats.sdd;
    const double step_b = gb / dn - stats.mean * step_w;
    next.w[j] = start.w[j] - step_w;
    next.b[j] = start.b[j] - step_b;
  }
  return next;
}

/// Closed-form MSE fit by one Newton step from w = b = 0.
inline FitResult fit_affine_newton(const FitProblem& p) {
  const std::size_t m = p.width();
  AffineParams zero{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  FitResult r;
  r.params = newton_step(zero, p, &r.degenerate);
  r.final_loss = fit_loss(r.params, p);
  r.iterations = 1;
  r.converged = true;
  r.loss_history = {fit_loss(zero, p), r.final_loss};
  return r;
}

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iters = 500;
  double tol = 1e-8;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  std::size_t max_halvings = 30;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline std::vector<double> pack(const AffineParams& a) {
  std::vector<double> x(a.w);
  x.insert(x.end(), a.b.begin(), a.b.end());
  return x;
}

inline AffineParams unpack(std::span<const double> x) {
  const std::size_t m = x.size() / 2;
  return {std::vector<double>(x.begin(), x.begin() + m), std::vector<double>(x.begin() + m, x.end())};
}

}  // namespace detail

/// Limited-memory BFGS with backtracking Armijo line search.
/// Starts from w = 0 and b = column means (MSE) or b = 0 (cross-entropy).
inline FitResult fit_affine_lbfgs(const FitProblem& p, const LbfgsOptions& opt = {}) {
  p.validate();
  const std::size_t m = p.width();
  AffineParams init{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  if (p.loss == LossKind::mse) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p.samples(); ++k) s += p.targets(k, j);
      init.b[j] = s / static_cast<double>(p.samples());
    }
  }

  std::vector<double> x = detail::pack(init);
  auto eval = [&](std::span<const double> at) { return loss_and_grad(detail::unpack(at), p); };
  LossGrad cur = eval(x);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  FitResult r;
  r.loss_history.push_back(cur.loss);

  const std::size_t dim = x.size();
  std::vector<double> d(dim), x_new(dim), alpha(opt.memory);
  std::size_t it = 0;
  bool converged = std::sqrt(detail::dot(cur.grad, cur.grad)) <= opt.tol;
  bool aborted = false;

  while (!converged && it < opt.max_iters) {
    // two-loop recursion: d = -H g
    for (std::size_t i = 0; i < dim; ++i) d[i] = -cur.grad[i];
    const std::size_t k = s_hist.size();
    for (std::size_t i = k; i-- > 0;) {
      alpha[i] = rho_hist[i] * detail::dot(s_hist[i], d);
      for (std::size_t q = 0; q < dim; ++q) d[q] -= alpha[i] * y_hist[i][q];
    }
    if (k > 0) {
      const double gamma = detail::dot(s_hist.back(), y_hist.back()) / detail::dot(y_hist.back(), y_hist.back());
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double beta = rho_hist[i] * detail::dot(y_hist[i], d);
      for (std::size_t q = 0; q < dim; ++q) d[q] += s_hist[i][q] * (alpha[i] - beta);
    }

    double slope = detail::dot(cur.grad, d);
    if (!(slope < 0.0)) {
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      for (std::size_t i = 0; i < dim; ++i) d[i] = -cur.grad[i];
      slope = detail::dot(cur.grad, d);
    }

    double step = 1.0;
    if (k == 0) step = std::min(1.0, 1.0 / std::sqrt(detail::dot(cur.grad, cur.grad)));

    LossGrad next;
    bool accepted = false;
    for (std::size_t h = 0; h <= opt.max_halvings; ++h) {
      for (std::size_t i = 0; i < dim; ++i) x_new[i] = x[i] + step * d[i];
      next = eval(x_new);
      if (std::isfinite(next.loss) && next.loss <= cur.loss + opt.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    ++it;
    if (!accepted) {
      aborted = true;
      break;
    }

    std::vector<double> s(dim), y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = next.grad[i] - cur.grad[i];
    }
    const double sy = detail::dot(s, y);
    if (sy > 1e-16 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      if (s_hist.size() == opt.memory) s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    x = x_new;
    cur = std::move(next);
    r.loss_history.push_back(cur.loss);
    converged = std::sqrt(detail::dot(cur.grad, cur.grad)) <= opt.tol;
  }

  r.params = detail::unpack(x);
  r.final_loss = cur.loss;
  r.iterations = it;
  r.converged = converged && !aborted;
  return r;
}

inline constexpr std::size_t kNewtonMaxWidth = 16;

/// Newton for narrow MSE layers, L-BFGS otherwise.
inline FitResult fit_affine(const FitProblem& p, const LbfgsOptions& opt = {}) {
  if (p.loss == LossKind::mse && p.width() <= kNewtonMaxWidth) return fit_affine_newton(p);
  return fit_affine_lbfgs(p, opt);
}

}  // namespace srnet
