#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace realslice {

using Complex = std::complex<double>;

/// Rectangular region of the complex plane: x = Re z, y = Im z.
struct Window {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  [[nodiscard]] bool valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  [[nodiscard]] bool contains(double x, double y, double tol = 0.0) const noexcept {
    return x >= x_min - tol && x <= x_max + tol && y >= y_min - tol && y <= y_max + tol;
  }

  [[nodiscard]] bool y_symmetric() const noexcept { return y_min == -y_max; }

  friend bool operator==(const Window&, const Window&) = default;
};

/// Default frame: x in [-2pi, 2pi], y in [-3, 3].
inline Window standard_window() {
  constexpr double two_pi = 6.283185307179586476925286766559;
  return Window{-two_pi, two_pi, -3.0, 3.0};
}

enum class BranchKind { real_axis, vertical_line, horizontal_line, implicit_curve };

inline std::string_view to_string(BranchKind k) noexcept {
  switch (k) {
    case BranchKind::real_axis: return "real-axis";
    case BranchKind::vertical_line: return "vertical-line";
    case BranchKind::horizontal_line: return "horizontal-line";
    case BranchKind::implicit_curve: return "implicit-curve";
  }
  return "implicit-curve";
}

inline std::optional<BranchKind> branch_kind_from_string(std::string_view s) noexcept {
  if (s == "real-axis") return BranchKind::real_axis;
  if (s == "vertical-line") return BranchKind::vertical_line;
  if (s == "horizontal-line") return BranchKind::horizontal_line;
  if (s == "implicit-curve") return BranchKind::implicit_curve;
  return std::nullopt;
}

}  // namespace realslice
