#pragma once

// Solving f(z) = w for real w on the real slice.
//
// Along each branch the real part v = Re f is a real function of one free
// coordinate, so roots are bracketed by sign changes of v - w between
// consecutive points and isolated with TOMS 748. Every candidate is then
// polished and verified with complex Newton on f(z) - w.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "realslice/expr.hpp"
#include "realslice/slicer.hpp"
#include "realslice/types.hpp"

namespace realslice {

struct Root {
  Complex z{};
  double residual = 0.0;  // |f(z) - w|
  std::size_t branch = 0;  // index into SliceSet::branches
  std::optional<std::size_t> conjugate;  // index of the partner in the same result list
  bool tangency = false;  // v - w touches zero without crossing
  bool newton_verified = false;

  friend bool operator==(const Root&, const Root&) = default;
};

enum class NewtonStatus { converged, derivative_vanished, diverged, drifted, max_steps };

inline std::string_view to_string(NewtonStatus s) noexcept {
  switch (s) {
    case NewtonStatus::converged: return "converged";
    case NewtonStatus::derivative_vanished: return "derivative vanished";
    case NewtonStatus::diverged: return "diverged";
    case NewtonStatus::drifted: return "drifted off the branch";
    case NewtonStatus::max_steps: return "step limit reached";
  }
  return "unknown";
}

struct NewtonOptions {
  int max_steps = 50;
  double residual_tol = 1e-12;
  /// When set, the limit must stay within this distance of the start.
  std::optional<double> max_drift;
};

struct NewtonResult {
  Complex z{};
  double residual = std::numeric_limits<double>::infinity();
  NewtonStatus status = NewtonStatus::max_steps;
  int steps = 0;

  [[nodiscard]] bool ok() const noexcept { return status == NewtonStatus::converged; }
};

/// Complex Newton on f(z) - w from z0. `derivative` must be d/dz of `e`.
inline NewtonResult newton_verify(const Expr& e, const Expr& derivative, Complex z0, double w,
                                  const NewtonOptions& opt = {}) {
  NewtonResult out;
  Complex z = z0;
  for (int step = 0; step <= opt.max_steps; ++step) {
    const EvalResult f = eval(e, z);
    if (!f) return {z, out.residual, NewtonStatus::diverged, step};
    const Complex g = f.value - w;
    const double r = std::abs(g);
    const EvalResult d = eval(derivative, z);
    if (r < opt.residual_tol) {
      out = {z, r, NewtonStatus::converged, step};
      // One extra step usually buys the last bits of the root.
      if (d && d.value != Complex{}) {
        const Complex z2 = z - g / d.value;
        const EvalResult f2 = eval(e, z2);
        if (f2 && std::abs(f2.value - w) < r) out = {z2, std::abs(f2.value - w), NewtonStatus::converged, step + 1};
      }
      if (opt.max_drift && std::abs(out.z - z0) > *opt.max_drift) out.status = NewtonStatus::drifted;
      return out;
    }
    if (step == opt.max_steps) return {z, r, NewtonStatus::max_steps, step};
    if (!d) return {z, r, NewtonStatus::diverged, step};
    if (std::abs(d.value) <= 1e-14 * std::max(1.0, std::abs(f.value)))
      return {z, r, NewtonStatus::derivative_vanished, step};
    z -= g / d.value;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return {z, r, NewtonStatus::diverged, step + 1};
  }
  return {z, out.residual, NewtonStatus::max_steps, opt.max_steps};
}

inline NewtonResult newton_verify(const Expr& e, Complex z0, double w, const NewtonOptions& opt = {}) {
  return newton_verify(e, differentiate(e), z0, w, opt);
}

struct SolveOptions {
  double bracket_tol = 1e-12;     // |dt| at which bracketing stops
  double dedupe_radius = 1e-8;
  double tangency_gap = 1e-7;     // |v - w| below which a local minimum is polished
  double residual_limit = 1e-9;   // roots above this residual are discarded
};

namespace detail {

class LevelSolver {
 public:
  LevelSolver(const Expr& e, double w, const SliceSet& s, const SolveOptions& opt)
      : e_(e), de_(differentiate(e)), w_(w), s_(s), opt_(opt) {
    hx_ = (s.window.x_max - s.window.x_min) / s.grid.nx;
    hy_ = (s.window.y_max - s.window.y_min) / s.grid.ny;
  }

  std::vector<Root> run() {
    for (std::size_t b = 0; b < s_.branches.size(); ++b) scan(b);
    return assemble();
  }

 private:
  struct Candidate {
    Complex z;
    std::size_t branch;
    bool from_minimum;
  };

  // Parametrization of the curve between two consecutive branch points.
  struct Piece {
    SlicePoint p, q;
    bool along_x;

    [[nodiscard]] double t0() const { return along_x ? p.x : p.y; }
    [[nodiscard]] double t1() const { return along_x ? q.x : q.y; }
  };

  [[nodiscard]] Piece piece(const SlicePoint& p, const SlicePoint& q) const {
    return {p, q, std::abs(q.x - p.x) / hx_ >= std::abs(q.y - p.y) / hy_};
  }

  // Point of the slice at free coordinate t: linear guess, then Newton on Im f across the piece.
  [[nodiscard]] Complex curve(const Piece& pc, double t) const {
    const double span = pc.t1() - pc.t0();
    const double s = span == 0.0 ? 0.0 : (t - pc.t0()) / span;
    double x = pc.along_x ? t : pc.p.x + s * (pc.q.x - pc.p.x);
    double y = pc.along_x ? pc.p.y + s * (pc.q.y - pc.p.y) : t;
    const double x0 = x, y0 = y;
    for (int it = 0; it < 30; ++it) {
      const EvalResult f = eval(e_, {x, y});
      const EvalResult d = eval(de_, {x, y});
      if (!f || !d) return {x0, y0};
      const double slope = pc.along_x ? d.value.real() : d.value.imag();
      if (f.value.imag() == 0.0 || slope == 0.0) break;
      const double step = f.value.imag() / slope;
      if (pc.along_x) y -= step; else x -= step;
      if (std::abs(x - x0) > hx_ || std::abs(y - y0) > hy_) return {x0, y0};
      if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(pc.along_x ? y : x))) break;
    }
    return {x, y};
  }

  [[nodiscard]] double level_gap(const Piece& pc, double t) const {
    const EvalResult f = eval(e_, curve(pc, t));
    if (!f) return std::numeric_limits<double>::quiet_NaN();
    return f.value.real() - w_;
  }

  void bracket(const Piece& pc, std::size_t b) {
    double a = pc.t0(), c = pc.t1();
    double ga = level_gap(pc, a), gc = level_gap(pc, c);
    if (!(ga * gc < 0.0)) return;
    if (a > c) {
      std::swap(a, c);
      std::swap(ga, gc);
    }
    const double tol = opt_.bracket_tol;
    auto done = [tol](double lo, double hi) { return std::abs(hi - lo) < tol; };
    std::uintmax_t iters = 200;
    auto g = [&](double t) { return level_gap(pc, t); };
    try {
      const auto [lo, hi] = boost::math::tools::toms748_solve(g, a, c, ga, gc, done, iters);
      candidates_.push_back({curve(pc, 0.5 * (lo + hi)), b, false});
    } catch (const std::exception&) {
    }
  }

  void minimum(const Piece& pc, std::size_t b) {
    double a = pc.t0(), c = pc.t1();
    if (a > c) std::swap(a, c);
    auto g = [&](double t) { return std::abs(level_gap(pc, t)); };
    auto [t, gap] = boost::math::tools::brent_find_minima(g, a, c, 40);
    // Brent never samples the interval ends exactly; endpoints are checked separately.
    for (double end : {a, c}) {
      const double ge = g(end);
      if (ge < gap) {
        t = end;
        gap = ge;
      }
    }
    if (gap < opt_.tangency_gap) candidates_.push_back({curve(pc, t), b, true});
  }

  void scan(std::size_t b) {
    const Branch& br = s_.branches[b];
    const auto& pts = br.points;
    const std::size_t n = pts.size();
    const std::size_t segs = br.closed ? n : n - 1;
    std::vector<double> gap(n);
    for (std::size_t i = 0; i < n; ++i) gap[i] = pts[i].v - w_;

    for (std::size_t i = 0; i < n; ++i)
      if (gap[i] == 0.0) candidates_.push_back({{pts[i].x, pts[i].y}, b, false});
    for (std::size_t i = 0; i < segs; ++i) {
      const std::size_t j = (i + 1) % n;
      if ((gap[i] < 0.0 && gap[j] > 0.0) || (gap[i] > 0.0 && gap[j] < 0.0)) bracket(piece(pts[i], pts[j]), b);
    }

    // Touching without crossing: local minima of |v - w| (branch ends included).
    for (std::size_t i = 0; i < n; ++i) {
      const bool has_prev = br.closed || i > 0;
      const bool has_next = br.closed || i + 1 < n;
      const std::size_t prev = (i + n - 1) % n, next = (i + 1) % n;
      const double here = std::abs(gap[i]);
      if (here == 0.0) continue;
      double variation = 0.0;
      bool is_min = true;
      bool crossing = false;
      for (auto [has, k] : {std::pair{has_prev, prev}, std::pair{has_next, next}}) {
        if (!has) continue;
        is_min = is_min && here <= std::abs(gap[k]);
        variation = std::max(variation, std::abs(gap[k] - gap[i]));
        crossing = crossing || gap[k] * gap[i] <= 0.0;
      }
      if (!is_min || crossing || here > 2.0 * variation + opt_.tangency_gap) continue;
      if (has_prev) minimum(piece(pts[prev], pts[i]), b);
      if (has_next) minimum(piece(pts[i], pts[next]), b);
    }
  }

  [[nodiscard]] bool in_window(Complex z) const {
    const Window& w = s_.window;
    const double tol = 1e-9 * (1.0 + std::max({std::abs(w.x_min), std::abs(w.x_max), std::abs(w.y_min), std::abs(w.y_max)}));
    return w.contains(z.real(), z.imag(), tol);
  }

  std::vector<Root> assemble() {
    const double cell = std::hypot(hx_, hy_);
    std::vector<Root> found;
    for (const Candidate& c : candidates_) {
      NewtonOptions nopt;
      nopt.max_drift = c.from_minimum ? 1.5 * cell : 1e-6;
      const NewtonResult nr = newton_verify(e_, de_, c.z, w_, nopt);
      Root r;
      r.branch = c.branch;
      if (nr.ok()) {
        r.z = nr.z;
        r.residual = nr.residual;
        r.newton_verified = true;
      } else {
        if (c.from_minimum) continue;
        const EvalResult f = eval(e_, c.z);
        if (!f) continue;
        r.z = c.z;
        r.residual = std::abs(f.value - w_);
      }
      if (!(r.residual < opt_.residual_limit) || !in_window(r.z)) continue;
      // A double root: f' vanishes where v - w only touches zero.
      const EvalResult d = eval(de_, r.z);
      r.tangency = d && std::abs(d.value) < 1e-5;
      found.push_back(r);
    }

    auto less = [](const Root& a, const Root& b) {
      if (a.z.real() != b.z.real()) return a.z.real() < b.z.real();
      return a.z.imag() < b.z.imag();
    };
    std::sort(found.begin(), found.end(), less);

    std::vector<Root> out;
    for (const Root& r : found) {
      auto dup = std::find_if(out.begin(), out.end(),
                              [&](const Root& o) { return std::abs(o.z - r.z) < opt_.dedupe_radius; });
      if (dup == out.end()) {
        out.push_back(r);
        continue;
      }
      const bool tangency = dup->tangency || r.tangency;
      if (prefer(r, *dup)) *dup = r;
      dup->tangency = tangency;
    }

    for (Root& r : out) {
      if (std::abs(r.z.imag()) >= 1e-8) continue;
      // Real roots are reported against the real-axis branch covering them.
      for (std::size_t b = 0; b < s_.branches.size(); ++b) {
        const Branch& br = s_.branches[b];
        if (br.kind != BranchKind::real_axis) continue;
        const double lo = std::min(br.points.front().x, br.points.back().x);
        const double hi = std::max(br.points.front().x, br.points.back().x);
        if (r.z.real() >= lo - 1e-9 && r.z.real() <= hi + 1e-9) {
          r.branch = b;
          break;
        }
      }
    }

    std::sort(out.begin(), out.end(), less);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (std::abs(out[i].z.imag()) < 1e-8) continue;
      for (std::size_t j = 0; j < out.size(); ++j)
        if (j != i && std::abs(out[j].z - std::conj(out[i].z)) < opt_.dedupe_radius) {
          out[i].conjugate = j;
          break;
        }
    }
    return out;
  }

  [[nodiscard]] bool prefer(const Root& r, const Root& current) const {
    const bool r_axis = s_.branches[r.branch].kind == BranchKind::real_axis;
    const bool c_axis = s_.branches[current.branch].kind == BranchKind::real_axis;
    if (r_axis != c_axis && std::abs(r.z.imag()) < 1e-8) return r_axis;
    if (r.newton_verified != current.newton_verified) return r.newton_verified;
    return r.residual < current.residual;
  }

  Expr e_, de_;
  double w_;
  const SliceSet& s_;
  SolveOptions opt_;
  double hx_ = 0.0, hy_ = 0.0;
  std::vector<Candidate> candidates_;
};

}  // namespace detail

/// Solves f(z) = w on the real slice s of e. Results are sorted by (Re z, Im z) and
/// conjugate partners are linked by index.
inline std::vector<Root> solve_level(const Expr& e, double w, const SliceSet& s, const SolveOptions& opt = {}) {
  if (!std::isfinite(w)) return {};
  return detail::LevelSolver(e, w, s, opt).run();
}

}  // namespace realslice
