#pragma once

// Shared helpers for the test suites: random grammar expressions and
// closed-form root counts computed directly from the defining real formulas.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "realslice/realslice.hpp"

namespace rs_test {

using realslice::Complex;
using realslice::Window;
using std::numbers::pi;

/// Random well-formed expression text over a tame subset of the grammar.
class ExprGenerator {
 public:
  explicit ExprGenerator(unsigned seed) : rng_(seed) {}

  std::string next(int depth = 3) { return gen(depth); }

 private:
  std::string leaf() {
    switch (pick(6)) {
      case 0: return "z";
      case 1: return "z";
      case 2: return constant();
      case 3: return "pi";
      case 4: return "(z + " + constant() + ")";
      default: return constant() + "*z";
    }
  }

  std::string constant() {
    static const char* values[] = {"2", "0.5", "3", "1.25", "0.75", "1"};
    return values[pick(6)];
  }

  std::string gen(int depth) {
    if (depth == 0) return leaf();
    static const char* fns[] = {"sin", "cos", "sinh", "cosh", "exp", "tan", "sec", "tanh"};
    switch (pick(7)) {
      case 0:
      case 1: return std::string(fns[pick(8)]) + "(" + gen(depth - 1) + ")";
      case 2: return gen(depth - 1) + " + " + gen(depth - 1);
      case 3: return "(" + gen(depth - 1) + ") * (" + gen(depth - 1) + ")";
      case 4: return gen(depth - 1) + " - " + constant();
      case 5: return "(" + gen(depth - 1) + ")^2";
      default: return "(" + gen(depth - 1) + ") / " + constant();
    }
  }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::mt19937 rng_;
};

/// Expected roots as points in the plane.
using Points = std::vector<Complex>;

inline bool inside(const Window& w, Complex p, double tol = 1e-12) {
  return p.real() >= w.x_min - tol && p.real() <= w.x_max + tol && p.imag() >= w.y_min - tol &&
         p.imag() <= w.y_max + tol;
}

/// All x = base + 2k*pi in [lo, hi].
inline std::vector<double> periodic(double base, double period, double lo, double hi) {
  std::vector<double> out;
  const double k0 = std::ceil((lo - base) / period - 1e-12);
  for (double k = k0;; k += 1.0) {
    const double x = base + k * period;
    if (x > hi + 1e-12) break;
    out.push_back(x);
  }
  return out;
}

inline void add_unique(Points& out, Complex p) {
  for (const auto& q : out)
    if (std::abs(p - q) < 1e-8) return;
  out.push_back(p);
}

/// sin(z) + c = w. Real axis: sin x = u. Verticals x = (2n+1)pi/2: sin(x0) cosh y = u.
inline Points sin_level_roots(double c, double w, const Window& win) {
  const double u = w - c;
  Points out;
  if (std::abs(u) <= 1.0 && win.y_min <= 0.0 && 0.0 <= win.y_max) {
    const double a = std::asin(u);
    for (double x : periodic(a, 2 * pi, win.x_min, win.x_max)) add_unique(out, {x, 0.0});
    for (double x : periodic(pi - a, 2 * pi, win.x_min, win.x_max)) add_unique(out, {x, 0.0});
  }
  if (std::abs(u) >= 1.0) {
    const double y = std::acosh(std::abs(u));
    for (double x0 : periodic(pi / 2, pi, win.x_min, win.x_max)) {
      if (std::sin(x0) * u < 0.0) continue;
      for (double yy : {y, -y})
        if (inside(win, {x0, yy})) add_unique(out, {x0, yy});
    }
  }
  return out;
}

/// exp(z) + c = w on horizontals y = n*pi: (-1)^n e^x = u.
inline Points exp_level_roots(double c, double w, const Window& win) {
  const double u = w - c;
  Points out;
  if (u == 0.0) return out;
  const double x = std::log(std::abs(u));
  for (double y0 : periodic(0.0, pi, win.y_min, win.y_max)) {
    const double sign = std::cos(y0) > 0 ? 1.0 : -1.0;
    if (sign * u > 0.0 && inside(win, {x, y0})) add_unique(out, {x, y0});
  }
  return out;
}

/// cosh(z) = u. Real axis cosh x = u, x = 0 vertical cos y = u, horizontals (-1)^n cosh x = u.
inline Points cosh_level_roots(double u, const Window& win) {
  Points out;
  if (u >= 1.0) {
    const double x = std::acosh(u);
    for (double xx : {x, -x})
      if (inside(win, {xx, 0.0})) add_unique(out, {xx, 0.0});
  }
  if (std::abs(u) <= 1.0 && win.x_min <= 0.0 && 0.0 <= win.x_max) {
    const double a = std::acos(u);
    for (double y : periodic(a, 2 * pi, win.y_min, win.y_max)) add_unique(out, {0.0, y});
    for (double y : periodic(-a, 2 * pi, win.y_min, win.y_max)) add_unique(out, {0.0, y});
  }
  if (std::abs(u) >= 1.0) {
    const double x = std::acosh(std::abs(u));
    for (double y0 : periodic(pi, pi, win.y_min, win.y_max)) {
      if (std::abs(y0) < 1e-12) continue;
      const double sign = std::cos(y0) > 0 ? 1.0 : -1.0;
      if (sign * u < 0.0) continue;
      for (double xx : {x, -x})
        if (inside(win, {xx, y0})) add_unique(out, {xx, y0});
    }
  }
  return out;
}

/// sec(z) = u. Real axis cos x = 1/u, verticals x = n*pi: (-1)^n sech y = u.
inline Points sec_level_roots(double u, const Window& win) {
  Points out;
  if (std::abs(u) >= 1.0) {
    const double a = std::acos(1.0 / u);
    for (double x : periodic(a, 2 * pi, win.x_min, win.x_max)) add_unique(out, {x, 0.0});
    for (double x : periodic(-a, 2 * pi, win.x_min, win.x_max)) add_unique(out, {x, 0.0});
  }
  if (u != 0.0 && std::abs(u) <= 1.0) {
    const double y = std::acosh(1.0 / std::abs(u));
    for (double x0 : periodic(0.0, pi, win.x_min, win.x_max)) {
      const double sign = std::cos(x0) > 0 ? 1.0 : -1.0;
      if (sign * u < 0.0) continue;
      for (double yy : {y, -y})
        if (inside(win, {x0, yy})) add_unique(out, {x0, yy});
    }
  }
  return out;
}

/// Every expected point has exactly one root within tol, and vice versa.
inline bool same_points(const Points& expected, const std::vector<realslice::Root>& roots, double tol) {
  if (expected.size() != roots.size()) return false;
  for (const auto& p : expected) {
    const auto hits = std::count_if(roots.begin(), roots.end(), [&](const auto& r) { return std::abs(r.z - p) < tol; });
    if (hits != 1) return false;
  }
  return true;
}

/// Largest |Im f| over the emitted points, and whether every |f| stays below the cap.
struct Soundness {
  double worst_im = 0.0;
  bool finite = true;
  std::size_t points = 0;
};

inline Soundness soundness(const realslice::Expr& e, const realslice::SliceSet& s) {
  Soundness out;
  for (const auto& b : s.branches)
    for (const auto& p : b.points) {
      const auto r = realslice::eval(e, {p.x, p.y});
      ++out.points;
      if (!r.ok() || std::abs(r.value) >= s.grid.pole_cap) {
        out.finite = false;
        continue;
      }
      out.worst_im = std::max(out.worst_im, std::abs(r.value.imag()));
    }
  return out;
}

/// For every point (x, y, v) there is a point within tol of (x, -y, v).
inline bool schwarz_symmetric(const realslice::SliceSet& s, double tol, std::string* why = nullptr) {
  std::vector<realslice::SlicePoint> all;
  for (const auto& b : s.branches) all.insert(all.end(), b.points.begin(), b.points.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  for (const auto& p : all) {
    auto lo = std::lower_bound(all.begin(), all.end(), p.x - tol, [](const auto& q, double x) { return q.x < x; });
    bool found = false;
    for (auto it = lo; it != all.end() && it->x <= p.x + tol; ++it) {
      if (std::abs(it->y + p.y) <= tol && std::abs(it->v - p.v) <= tol * std::max(1.0, std::abs(p.v))) {
        found = true;
        break;
      }
    }
    if (!found) {
      if (why != nullptr)
        *why = "no mirror for (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.v) + ")";
      return false;
    }
  }
  return true;
}

}  // namespace rs_test
