#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "srnet/errors.hpp"

namespace srnet {

// Protected-operator thresholds.
inline constexpr double kDivisionEpsilon = 1e-9;
inline constexpr double kLogZeroValue = -1e6;
inline constexpr double kOutputClamp = 1e12;

enum class Op : int { add, sub, mul, div, sqrt, square, sin, cos, ln, tan, exp };

namespace protected_ops {

inline double div(double a, double b) noexcept { return std::abs(b) < kDivisionEpsilon ? a : a / b; }

inline double ln(double a) noexcept {
  if (a == 0.0) return kLogZeroValue;
  double r = std::log(std::abs(a));
  return r < kLogZeroValue ? kLogZeroValue : r;
}

inline double sqrt(double a) noexcept { return std::sqrt(std::abs(a)); }

inline double clamp_output(double v) noexcept {
  if (v > kOutputClamp) return kOutputClamp;
  if (v < -kOutputClamp) return -kOutputClamp;
  return v;  // NaN passes through and stays detectable
}

inline double tan(double a) noexcept { return clamp_output(std::tan(a)); }
inline double exp(double a) noexcept { return clamp_output(std::exp(a)); }

}  // namespace protected_ops

inline double apply_op(Op op, double a, double b) noexcept {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return protected_ops::div(a, b);
    case Op::sqrt: return protected_ops::sqrt(a);
    case Op::square: return a * a;
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::ln: return protected_ops::ln(a);
    case Op::tan: return protected_ops::tan(a);
    case Op::exp: return protected_ops::exp(a);
  }
  return a;
}

// Vectorised form used by the graph evaluator. `b` is ignored for unary ops.
inline void apply_op(Op op, std::span<const double> a, std::span<const double> b, std::span<double> out) noexcept {
  const std::size_t n = out.size();
  switch (op) {
    case Op::add: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i]; break;
    case Op::sub: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i]; break;
    case Op::mul: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i]; break;
    case Op::div: for (std::size_t i = 0; i < n; ++i) out[i] = protected_ops::div(a[i], b[i]); break;
    case Op::sqrt: for (std::size_t i = 0; i < n; ++i) out[i] = protected_ops::sqrt(a[i]); break;
    case Op::square: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i]; break;
    case Op::sin: for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(a[i]); break;
    case Op::cos: for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(a[i]); break;
    case Op::ln: for (std::size_t i = 0; i < n; ++i) out[i] = protected_ops::ln(a[i]); break;
    case Op::tan: for (std::size_t i = 0; i < n; ++i) out[i] = protected_ops::tan(a[i]); break;
    case Op::exp: for (std::size_t i = 0; i < n; ++i) out[i] = protected_ops::exp(a[i]); break;
  }
}

enum class InfixStyle { binary, call, square };

struct FunctionEntry {
  int opcode;
  Op op;
  std::string name;
  int arity;
  InfixStyle style;
};

/// Ordered function look-up table; genes store the position in this table.
class FunctionSet {
 public:
  FunctionSet() = default;
  explicit FunctionSet(std::vector<Op> ops) {
    for (Op op : ops) add(op);
  }

  /// + - * / sqrt square sin cos ln tan exp, in that order.
  static FunctionSet standard() {
    return FunctionSet({Op::add, Op::sub, Op::mul, Op::div, Op::sqrt, Op::square, Op::sin, Op::cos, Op::ln,
                        Op::tan, Op::exp});
  }

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] const FunctionEntry& operator[](std::size_t i) const { return entries_.at(i); }
  [[nodiscard]] const std::vector<FunctionEntry>& entries() const noexcept { return entries_; }

  [[nodiscard]] int opcode_of(Op op) const {
    for (const auto& e : entries_)
      if (e.op == op) return e.opcode;
    throw ConfigError("operator not in function set");
  }

 private:
  void add(Op op) {
    FunctionEntry e{static_cast<int>(entries_.size()), op, {}, 2, InfixStyle::binary};
    switch (op) {
      case Op::add: e.name = "+"; break;
      case Op::sub: e.name = "-"; break;
      case Op::mul: e.name = "*"; break;
      case Op::div: e.name = "/"; break;
      case Op::sqrt: e.name = "sqrt"; e.arity = 1; e.style = InfixStyle::call; break;
      case Op::square: e.name = "square"; e.arity = 1; e.style = InfixStyle::square; break;
      case Op::sin: e.name = "sin"; e.arity = 1; e.style = InfixStyle::call; break;
      case Op::cos: e.name = "cos"; e.arity = 1; e.style = InfixStyle::call; break;
      case Op::ln: e.name = "ln"; e.arity = 1; e.style = InfixStyle::call; break;
      case Op::tan: e.name = "tan"; e.arity = 1; e.style = InfixStyle::call; break;
      case Op::exp: e.name = "exp"; e.arity = 1; e.style = InfixStyle::call; break;
    }
    entries_.push_back(std::move(e));
  }

  std::vector<FunctionEntry> entries_;
};

}  // namespace srnet
