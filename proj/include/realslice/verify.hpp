#pragma once

// Oracle agreement between the numeric slicer and the closed-form catalog.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "realslice/catalog.hpp"
#include "realslice/expr.hpp"
#include "realslice/roots.hpp"
#include "realslice/slicer.hpp"
#include "realslice/types.hpp"

namespace realslice {

inline double segment_distance(Complex p, Complex a, Complex b) {
  const Complex ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  const double t = std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

/// Distance from p to the nearest polyline of the slice.
inline double distance_to_slice(Complex p, const SliceSet& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : s.branches) {
    const auto& pts = b.points;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      best = std::min(best, segment_distance(p, {pts[i].x, pts[i].y}, {pts[i + 1].x, pts[i + 1].y}));
    if (b.closed && pts.size() > 2)
      best = std::min(best, segment_distance(p, {pts.back().x, pts.back().y}, {pts.front().x, pts.front().y}));
    if (pts.size() == 1) best = std::min(best, std::abs(p - Complex(pts[0].x, pts[0].y)));
  }
  return best;
}

/// Distance from p to the nearest catalog branch, as an exact line segment.
inline double distance_to_catalog(Complex p, const std::vector<BranchSpec>& specs) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : specs) best = std::min(best, segment_distance(p, b.point(b.t_min), b.point(b.t_max)));
  return best;
}

/// Evenly spaced samples of every catalog branch, skipping points within
/// `pole_radius` of a real-axis pole.
inline std::vector<Complex> sample_catalog(const std::vector<BranchSpec>& specs, std::size_t per_branch,
                                           double pole_radius) {
  std::vector<Complex> out;
  for (const auto& b : specs) {
    const auto poles = real_axis_poles(b.function, b.t_min - pole_radius, b.t_max + pole_radius);
    for (std::size_t k = 0; k < per_branch; ++k) {
      const double t = b.t_min + (b.t_max - b.t_min) * static_cast<double>(k) / static_cast<double>(per_branch - 1);
      const Complex p = b.point(t);
      const bool near_pole = std::any_of(poles.begin(), poles.end(), [&](double x) {
        return std::abs(p - Complex(x, 0.0)) < pole_radius;
      });
      if (!near_pole) out.push_back(p);
    }
  }
  return out;
}

struct HausdorffReport {
  double catalog_to_slice = 0.0;
  double slice_to_catalog = 0.0;

  [[nodiscard]] double max() const { return std::max(catalog_to_slice, slice_to_catalog); }
};

inline HausdorffReport hausdorff(FunctionId fn, const SliceSet& s, std::size_t per_branch = 1000) {
  const double hx = (s.window.x_max - s.window.x_min) / s.grid.nx;
  const double hy = (s.window.y_max - s.window.y_min) / s.grid.ny;
  const auto specs = enumerate_branches(fn, s.window);
  HausdorffReport r;
  for (const Complex& p : sample_catalog(specs, per_branch, 2.0 * std::hypot(hx, hy)))
    r.catalog_to_slice = std::max(r.catalog_to_slice, distance_to_slice(p, s));
  for (const auto& b : s.branches)
    for (const auto& p : b.points) r.slice_to_catalog = std::max(r.slice_to_catalog, distance_to_catalog({p.x, p.y}, specs));
  return r;
}

/// Largest |v - branch_value| over slice points, each matched to its nearest catalog branch.
inline double max_value_error(FunctionId fn, const SliceSet& s) {
  const auto specs = enumerate_branches(fn, s.window);
  double worst = 0.0;
  for (const auto& b : s.branches)
    for (const auto& p : b.points) {
      const Complex z(p.x, p.y);
      const BranchSpec* nearest = nullptr;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& spec : specs) {
        const double ds = segment_distance(z, spec.point(spec.t_min), spec.point(spec.t_max));
        if (ds < d) {
          d = ds;
          nearest = &spec;
        }
      }
      if (nearest == nullptr) return std::numeric_limits<double>::infinity();
      const double t = nearest->kind == BranchKind::vertical_line ? p.y : p.x;
      worst = std::max(worst, std::abs(p.v - branch_value(*nearest, t)));
    }
  return worst;
}

struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Self-contained agreement suite: slicer vs catalog for sin, sec, cosh and exp on
/// the standard window, plus the two non-real root families.
inline std::vector<OracleCheck> run_oracle_suite(const GridSpec& grid = {}) {
  std::vector<OracleCheck> out;
  const Window w = standard_window();
  const double diag = std::hypot((w.x_max - w.x_min) / grid.nx, (w.y_max - w.y_min) / grid.ny);
  const double limit = std::min(1e-2, 2.0 * diag);

  for (FunctionId fn : {FunctionId::sin, FunctionId::sec, FunctionId::cosh, FunctionId::exp}) {
    const std::string name(to_string(fn));
    const SliceSet s = extract_slice(catalog_expression(fn), w, grid);
    const HausdorffReport h = hausdorff(fn, s);
    out.push_back({name + " geometry", h.max() < limit,
                   "hausdorff " + detail::format_double(h.max()) + " (limit " + detail::format_double(limit) + ")"});
    const double verr = max_value_error(fn, s);
    out.push_back({name + " values", verr < 1e-6, "max |v - closed form| " + detail::format_double(verr)});
  }

  {
    const Expr e = parse("sin(z)+2");
    const auto roots = solve_level(e, 0.0, extract_slice(e, w, grid));
    const double y = std::log(2.0 + std::sqrt(3.0));
    bool ok = roots.size() == 4;
    for (const auto& r : roots) {
      const double dx = std::min(std::abs(r.z.real() + std::numbers::pi / 2), std::abs(r.z.real() - 3 * std::numbers::pi / 2));
      ok = ok && dx < 1e-9 && std::abs(std::abs(r.z.imag()) - y) < 1e-9 && r.conjugate.has_value();
    }
    out.push_back({"sin(z)+2 = 0 roots", ok, std::to_string(roots.size()) + " roots"});
  }
  {
    const Expr e = parse("exp(z)+1");
    const Window we{-2.0, 2.0, -7.0, 7.0};
    const auto roots = solve_level(e, 0.0, extract_slice(e, we, grid));
    bool ok = roots.size() == 2;
    for (const auto& r : roots)
      ok = ok && std::abs(r.z.real()) < 1e-9 && std::abs(std::abs(r.z.imag()) - std::numbers::pi) < 1e-9;
    out.push_back({"exp(z)+1 = 0 roots", ok, std::to_string(roots.size()) + " roots"});
  }
  return out;
}

}  // namespace realslice
