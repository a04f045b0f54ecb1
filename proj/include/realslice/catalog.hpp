#pragma once

// Closed-form real-slice branches for sin, sec, cosh and exp.
//
// Writing z = x + iy:
//   sin z  = sin x cosh y + i cos x sinh y    real on y = 0 and x = (2n+1)pi/2
//   sec z  = 1 / (cos x cosh y + i sin x sinh y)
//                                             real on y = 0 (off the poles) and x = n pi
//   cosh z = cosh x cos y + i sinh x sin y    real on x = 0 and y = n pi
//   exp z  = e^x (cos y + i sin y)            real on y = n pi
//
// These families are exact, and serve as the oracle for the numeric slicer.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "realslice/expr.hpp"
#include "realslice/types.hpp"

namespace realslice {

enum class FunctionId { sin, sec, cosh, exp };

inline std::string_view to_string(FunctionId f) noexcept {
  switch (f) {
    case FunctionId::sin: return "sin";
    case FunctionId::sec: return "sec";
    case FunctionId::cosh: return "cosh";
    case FunctionId::exp: return "exp";
  }
  return "sin";
}

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline FunctionId function_id_from_string(std::string_view name) {
  if (name == "sin") return FunctionId::sin;
  if (name == "sec") return FunctionId::sec;
  if (name == "cosh") return FunctionId::cosh;
  if (name == "exp") return FunctionId::exp;
  throw CatalogError("unknown catalog function '" + std::string(name) + "' (expected sin, sec, cosh or exp)");
}

/// The catalog function as a parsed expression, e.g. sin(z).
inline Expr catalog_expression(FunctionId f) { return parse(std::string(to_string(f)) + "(z)"); }

/// One closed-form branch. The free coordinate t is y on vertical lines and x otherwise;
/// [t_min, t_max] is its extent inside the enumeration window.
struct BranchSpec {
  FunctionId function = FunctionId::sin;
  BranchKind kind = BranchKind::real_axis;
  std::optional<double> anchor;
  int n = 0;
  double t_min = 0.0;
  double t_max = 0.0;

  [[nodiscard]] Complex point(double t) const {
    switch (kind) {
      case BranchKind::vertical_line: return {*anchor, t};
      case BranchKind::horizontal_line: return {t, *anchor};
      default: return {t, 0.0};
    }
  }
};

namespace detail {

inline double sign_of_index(int n) noexcept { return (n % 2 == 0) ? 1.0 : -1.0; }

// Members offset + n * period of the family that land in [lo, hi].
inline std::vector<std::pair<int, double>> lattice(double offset, double period, double lo, double hi) {
  std::vector<std::pair<int, double>> out;
  const auto first = static_cast<int>(std::ceil((lo - offset) / period)) - 1;
  const auto last = static_cast<int>(std::floor((hi - offset) / period)) + 1;
  for (int n = first; n <= last; ++n) {
    const double a = offset + n * period;
    if (a >= lo && a <= hi) out.emplace_back(n, a);
  }
  return out;
}

}  // namespace detail

/// Branches whose line meets the window, ordered real-axis pieces first, then
/// vertical lines by n, then horizontal lines by n.
inline std::vector<BranchSpec> enumerate_branches(FunctionId fn, const Window& w) {
  using std::numbers::pi;
  if (!w.valid()) throw CatalogError("window must have positive area");

  std::vector<BranchSpec> out;
  const bool has_axis = w.y_min <= 0.0 && 0.0 <= w.y_max;

  auto verticals = [&](double offset) {
    for (auto [n, a] : detail::lattice(offset, pi, w.x_min, w.x_max))
      out.push_back({fn, BranchKind::vertical_line, a, n, w.y_min, w.y_max});
  };
  auto horizontals = [&](bool skip_zero) {
    for (auto [n, a] : detail::lattice(0.0, pi, w.y_min, w.y_max)) {
      if (skip_zero && n == 0) continue;
      out.push_back({fn, BranchKind::horizontal_line, a, n, w.x_min, w.x_max});
    }
  };

  switch (fn) {
    case FunctionId::sin:
      if (has_axis) out.push_back({fn, BranchKind::real_axis, std::nullopt, 0, w.x_min, w.x_max});
      verticals(pi / 2);
      break;
    case FunctionId::sec:
      if (has_axis) {
        // Real axis split into maximal pole-free intervals.
        double lo = w.x_min;
        for (auto [k, p] : detail::lattice(pi / 2, pi, w.x_min, w.x_max)) {
          if (p > lo) out.push_back({fn, BranchKind::real_axis, std::nullopt, k, lo, p});
          lo = p;
        }
        if (lo < w.x_max) {
          const auto k = static_cast<int>(std::floor((lo - pi / 2) / pi)) + 1;
          out.push_back({fn, BranchKind::real_axis, std::nullopt, k, lo, w.x_max});
        }
      }
      verticals(0.0);
      break;
    case FunctionId::cosh:
      if (has_axis) out.push_back({fn, BranchKind::real_axis, std::nullopt, 0, w.x_min, w.x_max});
      if (w.x_min <= 0.0 && 0.0 <= w.x_max)
        out.push_back({fn, BranchKind::vertical_line, 0.0, 0, w.y_min, w.y_max});
      horizontals(true);
      break;
    case FunctionId::exp:
      // The real axis is the n = 0 member of the horizontal family.
      horizontals(false);
      break;
  }
  return out;
}

/// Exact value Re f on the branch at free coordinate t. Throws CatalogError at a pole.
inline double branch_value(const BranchSpec& b, double t) {
  const double s = detail::sign_of_index(b.n);
  switch (b.function) {
    case FunctionId::sin:
      if (b.kind == BranchKind::real_axis) return std::sin(t);
      return s * std::cosh(t);
    case FunctionId::sec:
      if (b.kind == BranchKind::real_axis) {
        const double c = std::cos(t);
        if (c == 0.0 || std::abs(1.0 / c) > kMagnitudeCap)
          throw CatalogError("sec has a pole at x = " + detail::format_double(t));
        return 1.0 / c;
      }
      return s / std::cosh(t);
    case FunctionId::cosh:
      if (b.kind == BranchKind::vertical_line) return std::cos(t);
      if (b.kind == BranchKind::horizontal_line) return s * std::cosh(t);
      return std::cosh(t);
    case FunctionId::exp: return s * std::exp(t);
  }
  return 0.0;
}

/// Human-readable value rule, e.g. "-cosh(y)".
inline std::string branch_rule(const BranchSpec& b) {
  const bool neg = (b.n % 2) != 0;
  const std::string sign = neg ? "-" : "";
  switch (b.function) {
    case FunctionId::sin: return b.kind == BranchKind::real_axis ? "sin(x)" : sign + "cosh(y)";
    case FunctionId::sec: return b.kind == BranchKind::real_axis ? "sec(x)" : sign + "sech(y)";
    case FunctionId::cosh:
      if (b.kind == BranchKind::vertical_line) return "cos(y)";
      if (b.kind == BranchKind::horizontal_line) return sign + "cosh(x)";
      return "cosh(x)";
    case FunctionId::exp: return sign + "exp(x)";
  }
  return {};
}

/// Real-axis poles of the function inside [lo, hi] (only sec has any).
inline std::vector<double> real_axis_poles(FunctionId fn, double lo, double hi) {
  std::vector<double> out;
  if (fn != FunctionId::sec) return out;
  for (auto [k, p] : detail::lattice(std::numbers::pi / 2, std::numbers::pi, lo, hi)) out.push_back(p);
  return out;
}

}  // namespace realslice
