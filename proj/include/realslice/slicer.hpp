#pragma once

// Numeric extraction of the real slice {z : Im f(z) = 0} over a window.
//
// Pipeline: sample Im f on a node grid padded by one ghost cell on every side
// (so lines lying on the window boundary are still seen as sign changes), mask
// cells touching poles, march squares over the sign of Im f, cut the contour
// at crossings of the slice, link segments into polylines, polish every vertex
// with Newton, classify, and reconnect straight pieces through the crossings.
//
// Crossings of the slice are critical points of f: by Cauchy-Riemann,
// grad Im f = (Im f', Re f'), so two zero curves of Im f can only cross where
// f' = 0. They are located with Newton on f' and the arms are split there.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "realslice/expr.hpp"
#include "realslice/types.hpp"

namespace realslice {

class SliceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  int nx = 256;
  int ny = 256;
  int refine_iters = 3;
  double im_tol = 1e-9;
  double pole_cap = 1e6;
  /// Worker threads for grid sampling; 0 picks the hardware concurrency. Never affects output.
  unsigned threads = 0;

  void validate() const {
    if (nx < 8 || ny < 8) throw SliceError("grid must have at least 8 cells per axis");
    if (refine_iters < 0) throw SliceError("refine_iters must be non-negative");
    if (!(im_tol > 0.0) || im_tol > 1e-6) throw SliceError("im_tol must lie in (0, 1e-6]");
    if (!(pole_cap > 0.0)) throw SliceError("pole_cap must be positive");
  }
};

struct SlicePoint {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;  // Re f(x + iy)

  friend bool operator==(const SlicePoint&, const SlicePoint&) = default;
};

struct Branch {
  BranchKind kind = BranchKind::implicit_curve;
  std::optional<double> anchor;
  std::vector<SlicePoint> points;
  bool closed = false;

  friend bool operator==(const Branch&, const Branch&) = default;
};

struct SliceDiagnostics {
  std::size_t cells = 0;
  std::size_t masked_pole_cells = 0;
  std::size_t singular_cells = 0;
  std::size_t crossings = 0;
  std::size_t dropped_points = 0;

  friend bool operator==(const SliceDiagnostics&, const SliceDiagnostics&) = default;
};

struct SliceSet {
  std::string expression;
  Window window;
  GridSpec grid;
  std::vector<Branch> branches;
  SliceDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Vertex refinement

enum class Axis { x, y };

enum class RefineStatus { converged, singular, not_converged, left_cell };

struct RefineOptions {
  double im_tol = 1e-9;
  int max_iters = 3;
  /// Largest allowed displacement from the start along the axis.
  double max_step = std::numeric_limits<double>::infinity();
};

struct RefineResult {
  double x = 0.0;
  double y = 0.0;
  RefineStatus status = RefineStatus::not_converged;
  int iterations = 0;

  [[nodiscard]] bool ok() const noexcept { return status == RefineStatus::converged; }
};

namespace detail {

/// eval through the upper half plane: f(conj z) = conj f(z) holds exactly for the grammar,
/// and evaluating it this way makes mirrored computations bit-for-bit mirrored.
inline EvalResult reflected_eval(const Expr& e, Complex z) noexcept {
  if (!(z.imag() < 0.0)) return eval(e, z);
  EvalResult r = eval(e, std::conj(z));
  r.value = std::conj(r.value);
  return r;
}

template <class Eval>
RefineResult refine_with(Eval&& evaluate, const Expr& e, const Expr& derivative, double x, double y, Axis axis,
                         const RefineOptions& opt) {
  const double x0 = x, y0 = y;
  for (int it = 0;; ++it) {
    const EvalResult f = evaluate(e, Complex{x, y});
    const EvalResult d = evaluate(derivative, Complex{x, y});
    if (!f || !d) return {x0, y0, RefineStatus::not_converged, it};
    // d(Im f)/dx = Im f', d(Im f)/dy = Re f'
    const double slope = axis == Axis::x ? d.value.imag() : d.value.real();
    if (std::abs(slope) <= opt.im_tol) return {x, y, RefineStatus::singular, it};
    const double im = f.value.imag();
    if (std::abs(im) < opt.im_tol) return {x, y, RefineStatus::converged, it};
    if (it >= opt.max_iters) return {x, y, RefineStatus::not_converged, it};
    if (axis == Axis::x) {
      x -= im / slope;
      if (!(std::abs(x - x0) <= opt.max_step)) return {x0, y0, RefineStatus::left_cell, it + 1};
    } else {
      y -= im / slope;
      if (!(std::abs(y - y0) <= opt.max_step)) return {x0, y0, RefineStatus::left_cell, it + 1};
    }
  }
}

}  // namespace detail

/// 1D Newton on Im f along one axis. `derivative` must be d/dz of `e`.
/// A vanishing axis derivative is reported as singular and leaves the point unchanged.
inline RefineResult refine_point(const Expr& e, const Expr& derivative, double x, double y, Axis axis,
                                 const RefineOptions& opt = {}) {
  return detail::refine_with([](const Expr& ex, Complex z) { return eval(ex, z); }, e, derivative, x, y, axis, opt);
}

inline RefineResult refine_point(const Expr& e, double x, double y, Axis axis, const RefineOptions& opt = {}) {
  return refine_point(e, differentiate(e), x, y, axis, opt);
}

// ---------------------------------------------------------------------------
// Classification helpers shared with the merge step and tests.

namespace detail {

inline int kind_rank(BranchKind k) noexcept { return static_cast<int>(k); }

inline bool straight(BranchKind k) noexcept { return k != BranchKind::implicit_curve; }

/// Classifies a polyline by coordinate spread, measured in cells.
inline std::pair<BranchKind, std::optional<double>> classify(const std::vector<SlicePoint>& pts, double hx,
                                                             double hy) {
  double x_lo = pts.front().x, x_hi = x_lo, y_lo = pts.front().y, y_hi = y_lo;
  double sx = 0.0, sy = 0.0, max_abs_y = 0.0;
  for (const auto& p : pts) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
    sx += p.x;
    sy += p.y;
    max_abs_y = std::max(max_abs_y, std::abs(p.y));
  }
  const double spread_x = (x_hi - x_lo) / hx;
  const double spread_y = (y_hi - y_lo) / hy;
  const auto n = static_cast<double>(pts.size());
  constexpr double limit = 1.5;

  const bool flat_y = spread_y < limit;
  const bool flat_x = spread_x < limit;
  if (flat_y && (!flat_x || spread_y <= spread_x)) {
    if (max_abs_y < hy) return {BranchKind::real_axis, std::nullopt};
    return {BranchKind::horizontal_line, sy / n};
  }
  if (flat_x) return {BranchKind::vertical_line, sx / n};
  return {BranchKind::implicit_curve, std::nullopt};
}

inline bool point_less(const SlicePoint& a, const SlicePoint& b) noexcept {
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

inline void orient(Branch& b) {
  auto& p = b.points;
  if (p.size() < 2) return;
  if (b.closed) {
    auto it = std::min_element(p.begin(), p.end(), point_less);
    std::rotate(p.begin(), it, p.end());
    if (point_less(p.back(), p[1])) std::reverse(p.begin() + 1, p.end());
    return;
  }
  bool flip = false;
  switch (b.kind) {
    case BranchKind::vertical_line: flip = p.back().y < p.front().y; break;
    case BranchKind::horizontal_line:
    case BranchKind::real_axis: flip = p.back().x < p.front().x; break;
    case BranchKind::implicit_curve: flip = point_less(p.back(), p.front()); break;
  }
  if (flip) std::reverse(p.begin(), p.end());
}

inline bool branch_less(const Branch& a, const Branch& b) noexcept {
  if (a.kind != b.kind) return kind_rank(a.kind) < kind_rank(b.kind);
  const double aa = a.anchor.value_or(-std::numeric_limits<double>::infinity());
  const double ba = b.anchor.value_or(-std::numeric_limits<double>::infinity());
  if (aa != ba) return aa < ba;
  return point_less(a.points.front(), b.points.front());
}

// ---------------------------------------------------------------------------

class Slicer {
 public:
  Slicer(const Expr& e, const Window& w, const GridSpec& g)
      : e_(e), de_(differentiate(e)), dde_(differentiate(de_)), w_(w), g_(g) {
    NX_ = g.nx + 2;
    hx_ = (w.x_max - w.x_min) / g.nx;
    hy_ = (w.y_max - w.y_min) / g.ny;
    xs_.resize(NX_ + 1);
    for (int i = 0; i <= NX_; ++i) {
      const double k = i - 1;
      xs_[i] = (w.x_min * (g.nx - k) + w.x_max * k) / g.nx;
    }
    // Rows sit at (k + 1/2) hy: never on the real axis, where Im f vanishes identically,
    // and mirror images of each other under y -> -y. One ghost row beyond each edge.
    const double k_lo = std::floor(w.y_min / hy_ - 0.5) - 1.0;
    const double k_hi = std::ceil(w.y_max / hy_ - 0.5) + 1.0;
    NY_ = static_cast<int>(k_hi - k_lo);
    ys_.resize(NY_ + 1);
    for (int j = 0; j <= NY_; ++j) ys_[j] = (k_lo + j + 0.5) * hy_;
    for (int j = 0; j < NY_; ++j)
      if (ys_[j + 1] > w.y_min && ys_[j] < w.y_max) {
        if (jw_lo_ < 0) jw_lo_ = j;
        jw_hi_ = j;
      }
  }

  SliceSet run(std::string expression) {
    sample();
    mask_cells();
    find_crossings();
    build_segments();
    auto raw = trace();
    attach_and_merge(raw);

    SliceSet out;
    out.expression = std::move(expression);
    out.window = w_;
    out.grid = g_;
    out.branches = finalize(std::move(raw));
    out.diagnostics = diag_;
    return out;
  }

 private:
  static EvalResult at(const Expr& e, Complex z) noexcept { return reflected_eval(e, z); }

  struct Sample {
    double re = 0.0;
    double im = 0.0;
    bool valid = false;
  };

  struct Segment {
    std::int64_t a;
    std::int64_t b;
  };

  struct Vertex {
    SlicePoint p;
    bool ok = false;
    bool outside = false;  // refined position lies beyond the window
  };

  [[nodiscard]] std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * (NX_ + 1) + i; }
  [[nodiscard]] std::size_t cell(int i, int j) const { return static_cast<std::size_t>(j) * NX_ + i; }

  [[nodiscard]] Sample sample_at(double x, double y) const {
    const EvalResult r = at(e_, {x, y});
    if (!r || std::abs(r.value) >= g_.pole_cap) return {};
    return {r.value.real(), r.value.imag(), true};
  }

  void sample() {
    nodes_.assign(static_cast<std::size_t>(NX_ + 1) * (NY_ + 1), Sample{});
    centers_.assign(static_cast<std::size_t>(NX_) * NY_, Sample{});
    auto rows = [this](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        for (int i = 0; i <= NX_; ++i) nodes_[node(i, j)] = sample_at(xs_[i], ys_[j]);
        if (j < NY_) {
          const double yc = 0.5 * (ys_[j] + ys_[j + 1]);
          for (int i = 0; i < NX_; ++i) centers_[cell(i, j)] = sample_at(0.5 * (xs_[i] + xs_[i + 1]), yc);
        }
      }
    };
    unsigned threads = g_.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : g_.threads;
    const int total = NY_ + 1;
    threads = std::min<unsigned>(threads, static_cast<unsigned>(total));
    if (threads <= 1) {
      rows(0, total);
      return;
    }
    std::vector<std::jthread> pool;
    const int chunk = (total + static_cast<int>(threads) - 1) / static_cast<int>(threads);
    for (int begin = 0; begin < total; begin += chunk) pool.emplace_back(rows, begin, std::min(total, begin + chunk));
  }

  void mask_cells() {
    masked_.assign(static_cast<std::size_t>(NX_) * NY_, false);
    singular_.assign(static_cast<std::size_t>(NX_) * NY_, false);
    for (int j = 0; j < NY_; ++j)
      for (int i = 0; i < NX_; ++i) {
        const bool bad = !nodes_[node(i, j)].valid || !nodes_[node(i + 1, j)].valid ||
                         !nodes_[node(i, j + 1)].valid || !nodes_[node(i + 1, j + 1)].valid ||
                         !centers_[cell(i, j)].valid;
        masked_[cell(i, j)] = bad;
      }
  }

  // An exact zero takes the side that flips under reflection, like every nonzero value.
  [[nodiscard]] bool positive(int i, int j) const {
    const double im = nodes_[node(i, j)].im;
    return im > 0.0 || (im == 0.0 && ys_[j] < 0.0);
  }

  [[nodiscard]] bool has_sign_change(int i, int j) const {
    const bool a = positive(i, j), b = positive(i + 1, j), c = positive(i + 1, j + 1), d = positive(i, j + 1);
    return !(a == b && b == c && c == d);
  }

  [[nodiscard]] double cell_distance(double x0, double y0, double x1, double y1) const {
    return std::max(std::abs(x1 - x0) / hx_, std::abs(y1 - y0) / hy_);
  }

  void find_crossings() {
    const double diag = std::hypot(hx_, hy_);
    for (int j = 0; j < NY_; ++j)
      for (int i = 0; i < NX_; ++i) {
        if (masked_[cell(i, j)] || !has_sign_change(i, j)) continue;
        const Complex c(0.5 * (xs_[i] + xs_[i + 1]), 0.5 * (ys_[j] + ys_[j + 1]));
        const EvalResult d1 = at(de_, c);
        const EvalResult d2 = at(dde_, c);
        if (!d1 || !d2) continue;
        if (d1.value != Complex{} && (d2.value == Complex{} || std::abs(d1.value) >= 1.5 * diag * std::abs(d2.value)))
          continue;
        if (auto z = critical_point(c, diag)) add_crossing(*z);
      }
    std::sort(crossings_.begin(), crossings_.end(),
              [](const Complex& a, const Complex& b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });

    for (const Complex& z : crossings_) {
      const double fi = (z.real() - xs_[0]) / hx_;
      const double fj = (z.imag() - ys_[0]) / hy_;
      const int i_lo = std::max(0, static_cast<int>(std::floor(fi - 0.05)));
      const int i_hi = std::min(NX_ - 1, static_cast<int>(std::floor(fi + 0.05)));
      const int j_lo = std::max(0, static_cast<int>(std::floor(fj - 0.05)));
      const int j_hi = std::min(NY_ - 1, static_cast<int>(std::floor(fj + 0.05)));
      for (int j = j_lo; j <= j_hi; ++j)
        for (int i = i_lo; i <= i_hi; ++i) singular_[cell(i, j)] = true;
      if (w_.contains(z.real(), z.imag(), 1e-9 * std::max(hx_, hy_))) ++diag_.crossings;
    }
  }

  // Newton on f' from the cell center; accepts a nearby zero of f' that lies on the slice.
  std::optional<Complex> critical_point(Complex start, double radius) const {
    Complex z = start;
    for (int it = 0; it < 40; ++it) {
      const EvalResult d1 = at(de_, z);
      if (!d1) return std::nullopt;
      if (d1.value == Complex{}) break;
      const EvalResult d2 = at(dde_, z);
      if (!d2 || d2.value == Complex{}) return std::nullopt;
      const Complex step = d1.value / d2.value;
      z -= step;
      if (std::abs(z - start) > radius) return std::nullopt;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    // Critical points of a real-coefficient f off by rounding from the real axis belong on it.
    if (z.imag() != 0.0 && std::abs(z.imag()) <= 1e-9 * hy_) {
      const EvalResult on_axis = at(de_, {z.real(), 0.0});
      const EvalResult here = at(de_, z);
      if (on_axis && here && std::abs(on_axis.value) <= 2.0 * std::abs(here.value)) z = {z.real(), 0.0};
    }
    const EvalResult d1 = at(de_, z);
    const EvalResult f = at(e_, z);
    if (!d1 || !f || std::abs(f.value) >= g_.pole_cap) return std::nullopt;
    if (std::abs(d1.value) > 1e-8 * (1.0 + std::abs(f.value))) return std::nullopt;
    if (std::abs(f.value.imag()) > g_.im_tol * std::max(1.0, std::abs(f.value))) return std::nullopt;
    return z;
  }

  void add_crossing(Complex z) {
    for (const Complex& c : crossings_)
      if (cell_distance(c.real(), c.imag(), z.real(), z.imag()) < 1e-6) return;
    crossings_.push_back(z);
  }

  // Edge keys: horizontal edge (i,j)-(i+1,j) is even, vertical edge (i,j)-(i,j+1) is odd.
  [[nodiscard]] std::int64_t hkey(int i, int j) const { return 2 * static_cast<std::int64_t>(node(i, j)); }
  [[nodiscard]] std::int64_t vkey(int i, int j) const { return 2 * static_cast<std::int64_t>(node(i, j)) + 1; }

  [[nodiscard]] Complex edge_point(std::int64_t key) const {
    const auto n = static_cast<std::size_t>(key / 2);
    const int i = static_cast<int>(n % (NX_ + 1));
    const int j = static_cast<int>(n / (NX_ + 1));
    const double v0 = nodes_[node(i, j)].im;
    if (key % 2 == 0) {
      const double v1 = nodes_[node(i + 1, j)].im;
      const double t = std::clamp(v0 / (v0 - v1), 0.0, 1.0);
      return {xs_[i] + t * (xs_[i + 1] - xs_[i]), ys_[j]};
    }
    const double v1 = nodes_[node(i, j + 1)].im;
    const double t = std::clamp(v0 / (v0 - v1), 0.0, 1.0);
    return {xs_[i], ys_[j] + t * (ys_[j + 1] - ys_[j])};
  }

  // A segment whose end values have opposite real parts but grow toward the middle
  // straddles a pole rather than a zero of Re f.
  [[nodiscard]] bool straddles_pole(std::int64_t ka, std::int64_t kb) const {
    const Complex a = edge_point(ka), b = edge_point(kb);
    const EvalResult fa = at(e_, a), fb = at(e_, b), fm = at(e_, 0.5 * (a + b));
    if (!fa || !fb || !fm) return true;
    if (std::abs(fm.value) >= g_.pole_cap) return true;
    const bool flips = (fa.value.real() > 0.0 && fb.value.real() < 0.0) || (fa.value.real() < 0.0 && fb.value.real() > 0.0);
    return flips && std::abs(fm.value) > std::max(std::abs(fa.value), std::abs(fb.value));
  }

  void build_segments() {
    for (int j = 0; j < NY_; ++j)
      for (int i = 0; i < NX_; ++i) {
        const std::size_t c = cell(i, j);
        if (masked_[c] || !has_sign_change(i, j)) continue;
        const bool bl = positive(i, j), br = positive(i + 1, j), tr = positive(i + 1, j + 1), tl = positive(i, j + 1);
        const std::int64_t bottom = hkey(i, j), top = hkey(i, j + 1), left = vkey(i, j), right = vkey(i + 1, j);

        std::vector<Segment> local;
        if (bl == tr && br == tl && bl != br) {
          const double center = centers_[c].im;
          if (center == 0.0) {
            singular_[c] = true;
          } else if ((center > 0.0) == bl) {
            // bl and tr are joined through the center: cut off br and tl.
            local.push_back({bottom, right});
            local.push_back({top, left});
          } else {
            local.push_back({left, bottom});
            local.push_back({right, top});
          }
        } else {
          std::vector<std::int64_t> hits;
          if (bl != br) hits.push_back(bottom);
          if (br != tr) hits.push_back(right);
          if (tr != tl) hits.push_back(top);
          if (tl != bl) hits.push_back(left);
          if (hits.size() == 2) local.push_back({hits[0], hits[1]});
        }
        if (singular_[c]) continue;
        bool pole = false;
        for (const auto& s : local) pole = pole || straddles_pole(s.a, s.b);
        if (pole) {
          masked_[c] = true;
          continue;
        }
        segments_.insert(segments_.end(), local.begin(), local.end());
      }

    for (int j = jw_lo_; j <= jw_hi_; ++j)
      for (int i = 1; i <= g_.nx; ++i) {
        ++diag_.cells;
        if (masked_[cell(i, j)]) ++diag_.masked_pole_cells;
        else if (singular_[cell(i, j)]) ++diag_.singular_cells;
      }
    if (diag_.masked_pole_cells == diag_.cells) throw SliceError("expression evaluates nowhere in the window");
  }

  Vertex refine_vertex(std::int64_t key) {
    const Complex start = edge_point(key);
    const EvalResult d = at(de_, start);
    Axis axis = key % 2 == 0 ? Axis::x : Axis::y;
    if (d) axis = std::abs(d.value.imag()) >= std::abs(d.value.real()) ? Axis::x : Axis::y;
    RefineOptions opt;
    opt.im_tol = g_.im_tol;
    opt.max_iters = g_.refine_iters;
    opt.max_step = axis == Axis::x ? hx_ : hy_;
    const RefineResult r = refine_with(at, e_, de_, start.real(), start.imag(), axis, opt);

    Vertex out;
    out.p = {r.x, r.y, 0.0};
    const double tol = 1e-9 * std::max(hx_, hy_);
    if (!w_.contains(r.x, r.y, tol)) {  // beyond the edge: only used to cut the path at the boundary
      out.outside = true;
      return out;
    }
    const EvalResult f = at(e_, {r.x, r.y});
    if (!f || std::abs(f.value.imag()) >= g_.im_tol || std::abs(f.value) >= g_.pole_cap) {
      ++diag_.dropped_points;
      return out;
    }
    out.p.v = f.value.real();
    out.ok = true;
    return out;
  }

  std::vector<Branch> trace() {
    // Graph over edge keys; every key touches at most two segments.
    std::vector<std::int64_t> keys;
    keys.reserve(segments_.size() * 2);
    for (const auto& s : segments_) {
      keys.push_back(s.a);
      keys.push_back(s.b);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    auto index_of = [&](std::int64_t k) {
      return static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), k) - keys.begin());
    };

    std::vector<std::vector<std::size_t>> adj(keys.size());
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      adj[index_of(segments_[s].a)].push_back(s);
      adj[index_of(segments_[s].b)].push_back(s);
    }

    std::vector<Vertex> verts(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) verts[k] = refine_vertex(keys[k]);

    std::vector<bool> used(segments_.size(), false);
    std::vector<Branch> out;

    auto walk = [&](std::size_t start, std::size_t seg) {
      std::vector<std::size_t> path{start};
      std::size_t cur = start;
      for (;;) {
        used[seg] = true;
        const std::size_t a = index_of(segments_[seg].a), b = index_of(segments_[seg].b);
        const std::size_t next = a == cur ? b : a;
        path.push_back(next);
        cur = next;
        if (adj[cur].size() != 2) break;
        std::optional<std::size_t> nxt;
        for (std::size_t s : adj[cur])
          if (!used[s]) nxt = s;
        if (!nxt) break;
        seg = *nxt;
      }
      const bool cycle = path.size() > 2 && path.front() == path.back();
      if (cycle) path.pop_back();
      emit(path, cycle, verts, out);
    };

    for (std::size_t k = 0; k < keys.size(); ++k) {
      if (adj[k].size() == 2) continue;
      for (std::size_t s : adj[k])
        if (!used[s]) walk(k, s);
    }
    for (std::size_t k = 0; k < keys.size(); ++k)
      for (std::size_t s : adj[k])
        if (!used[s]) walk(k, s);
    return out;
  }

  // Where the step from inside point p to outside point q leaves the window, refined along that edge.
  [[nodiscard]] std::optional<SlicePoint> boundary_point(const SlicePoint& p, const SlicePoint& q) const {
    double t = 1.0;
    Axis axis = Axis::x;
    double edge = 0.0;
    auto consider = [&](double from, double to, double bound, Axis along) {
      if (to == from || (to - bound) * (from - bound) > 0.0) return;
      const double s = (bound - from) / (to - from);
      if (s < t) {
        t = s;
        axis = along;
        edge = bound;
      }
    };
    if (q.x < w_.x_min) consider(p.x, q.x, w_.x_min, Axis::y);
    if (q.x > w_.x_max) consider(p.x, q.x, w_.x_max, Axis::y);
    if (q.y < w_.y_min) consider(p.y, q.y, w_.y_min, Axis::x);
    if (q.y > w_.y_max) consider(p.y, q.y, w_.y_max, Axis::x);
    if (t >= 1.0) return std::nullopt;
    double x = p.x + t * (q.x - p.x), y = p.y + t * (q.y - p.y);
    (axis == Axis::x ? y : x) = edge;
    RefineOptions opt;
    opt.im_tol = g_.im_tol;
    opt.max_iters = g_.refine_iters;
    opt.max_step = axis == Axis::x ? hx_ : hy_;
    const RefineResult r = refine_with(at, e_, de_, x, y, axis, opt);
    if (!r.ok() || !w_.contains(r.x, r.y)) return std::nullopt;
    const EvalResult f = at(e_, {r.x, r.y});
    if (!f || std::abs(f.value.imag()) >= g_.im_tol || std::abs(f.value) >= g_.pole_cap) return std::nullopt;
    return SlicePoint{r.x, r.y, f.value.real()};
  }

  // Splits a vertex path into runs of valid, closely spaced points.
  void emit(const std::vector<std::size_t>& path, bool cycle, const std::vector<Vertex>& verts,
            std::vector<Branch>& out) const {
    std::vector<std::vector<SlicePoint>> runs(1);
    // A vertex sitting on the window edge coincides with its own boundary cut.
    auto same = [&](const SlicePoint& a, const SlicePoint& b) { return cell_distance(a.x, a.y, b.x, b.y) < 1e-9; };
    auto push_cut = [&](std::vector<SlicePoint>& run, const SlicePoint& b) {
      if (run.empty() || !same(run.back(), b)) run.push_back(b);
    };
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Vertex& v = verts[path[k]];
      const Vertex* prev = k > 0 ? &verts[path[k - 1]] : (cycle ? &verts[path.back()] : nullptr);
      if (!v.ok) {
        if (v.outside && prev != nullptr && prev->ok && !runs.back().empty())
          if (auto b = boundary_point(prev->p, v.p)) push_cut(runs.back(), *b);
        if (!runs.back().empty()) runs.emplace_back();
        continue;
      }
      if (prev != nullptr && prev->outside && runs.back().empty())
        if (auto b = boundary_point(v.p, prev->p)) runs.back().push_back(*b);
      auto& run = runs.back();
      if (!run.empty()) {
        const SlicePoint& last = run.back();
        if (same(last, v.p)) continue;
        if (cell_distance(last.x, last.y, v.p.x, v.p.y) > 2.0) runs.emplace_back();
      }
      runs.back().push_back(v.p);
    }
    if (cycle && verts[path.front()].outside && verts[path.back()].ok && !runs.back().empty())
      if (auto b = boundary_point(verts[path.back()].p, verts[path.front()].p)) push_cut(runs.back(), *b);
    bool closed = cycle && runs.size() == 1;
    if (closed) {
      auto& run = runs.front();
      if (run.size() > 1 && run.front().x == run.back().x && run.front().y == run.back().y) run.pop_back();
      if (run.size() < 3 || cell_distance(run.front().x, run.front().y, run.back().x, run.back().y) > 2.0) closed = false;
    } else if (cycle && runs.size() > 1 && !runs.front().empty() && !runs.back().empty()) {
      // A broken cycle: the tail run continues into the head run.
      const SlicePoint& a = runs.back().back();
      const SlicePoint& b = runs.front().front();
      if (cell_distance(a.x, a.y, b.x, b.y) <= 2.0) {
        runs.back().insert(runs.back().end(), runs.front().begin(), runs.front().end());
        runs.front().clear();
      }
    }
    for (auto& run : runs) {
      if (run.size() < 2) continue;
      Branch b;
      auto [kind, anchor] = classify(run, hx_, hy_);
      b.kind = kind;
      b.anchor = anchor;
      b.points = std::move(run);
      b.closed = closed;
      out.push_back(std::move(b));
    }
  }

  [[nodiscard]] std::optional<double> anchor_of(const Branch& b) const {
    if (b.kind == BranchKind::real_axis || b.kind == BranchKind::implicit_curve) return std::nullopt;
    double s = 0.0;
    for (const auto& p : b.points) s += b.kind == BranchKind::vertical_line ? p.x : p.y;
    return s / static_cast<double>(b.points.size());
  }

  [[nodiscard]] bool collinear(const Branch& a, const Branch& b) const {
    if (a.kind != b.kind || !straight(a.kind)) return false;
    if (a.kind == BranchKind::real_axis) return true;
    const double h = a.kind == BranchKind::vertical_line ? hx_ : hy_;
    return std::abs(*a.anchor - *b.anchor) < 1.5 * h;
  }

  // Extends arm ends to the crossing they stop next to, then joins collinear arms through it.
  void attach_and_merge(std::vector<Branch>& branches) const {
    const double tol = 1e-9 * std::max(hx_, hy_);
    std::vector<SlicePoint> marks;
    for (const Complex& z : crossings_) {
      if (!w_.contains(z.real(), z.imag(), tol)) continue;
      const EvalResult f = at(e_, z);
      if (!f || std::abs(f.value.imag()) >= g_.im_tol || std::abs(f.value) >= g_.pole_cap) continue;
      marks.push_back({z.real(), z.imag(), f.value.real()});
    }

    // Each arm end goes to its nearest crossing within two cells. Ties prefer the crossing
    // on the same side of the real axis, so mirrored ends pick mirrored crossings.
    auto nearest = [&](const SlicePoint& p) -> const SlicePoint* {
      const SlicePoint* best = nullptr;
      double best_d = 2.0;
      for (const auto& z : marks) {
        const double d = cell_distance(p.x, p.y, z.x, z.y);
        if (d > best_d) continue;
        if (d == best_d && best != nullptr) {
          const bool z_side = (z.y < 0) == (p.y < 0), b_side = (best->y < 0) == (p.y < 0);
          if (!(z_side && !b_side) && !(z_side == b_side && std::abs(z.y) < std::abs(best->y))) continue;
        }
        best = &z;
        best_d = d;
      }
      return best;
    };
    for (auto& b : branches) {
      if (b.closed) continue;
      const SlicePoint* zf = nearest(b.points.front());
      const SlicePoint* zb = nearest(b.points.back());
      if (zf != nullptr && zb != nullptr && zf == zb) {
        // One crossing near both ends: it belongs to the closer one.
        const double df = cell_distance(b.points.front().x, b.points.front().y, zf->x, zf->y);
        const double db = cell_distance(b.points.back().x, b.points.back().y, zb->x, zb->y);
        (df <= db ? zb : zf) = nullptr;
      }
      auto same = [](const SlicePoint& p, const SlicePoint* z) { return p.x == z->x && p.y == z->y; };
      if (zf != nullptr && !same(b.points.front(), zf)) b.points.insert(b.points.begin(), *zf);
      if (zb != nullptr && !same(b.points.back(), zb)) b.points.push_back(*zb);
    }

    auto ends_at = [](const Branch& b, const SlicePoint& z) -> int {
      if (b.points.front().x == z.x && b.points.front().y == z.y) return 0;
      if (b.points.back().x == z.x && b.points.back().y == z.y) return 1;
      return -1;
    };
    auto side = [](const Branch& b, int end, const SlicePoint& z) {
      const SlicePoint& far = end == 0 ? b.points.back() : b.points.front();
      if (b.kind == BranchKind::vertical_line) return far.y > z.y;
      return far.x > z.x;
    };

    for (bool merged = true; merged;) {
      merged = false;
      for (const SlicePoint& z : marks) {
        for (std::size_t a = 0; a < branches.size() && !merged; ++a) {
          const int ea = ends_at(branches[a], z);
          if (ea < 0 || branches[a].closed || !straight(branches[a].kind)) continue;
          for (std::size_t b = a + 1; b < branches.size(); ++b) {
            const int eb = ends_at(branches[b], z);
            if (eb < 0 || branches[b].closed || !collinear(branches[a], branches[b])) continue;
            if (side(branches[a], ea, z) == side(branches[b], eb, z)) continue;
            auto pa = branches[a].points;
            auto pb = branches[b].points;
            if (ea == 0) std::reverse(pa.begin(), pa.end());
            if (eb == 1) std::reverse(pb.begin(), pb.end());
            pa.insert(pa.end(), pb.begin() + 1, pb.end());
            branches[a].points = std::move(pa);
            branches[a].anchor = anchor_of(branches[a]);
            branches.erase(branches.begin() + static_cast<std::ptrdiff_t>(b));
            merged = true;
            break;
          }
        }
        if (merged) break;
      }
    }
  }

  // Drops a branch when more than half of its points sit on another branch.
  [[nodiscard]] std::vector<Branch> dedupe(std::vector<Branch> branches) const {
    const double tol = 1e-6 * std::hypot(hx_, hy_);
    std::unordered_map<std::int64_t, std::vector<std::pair<std::size_t, std::size_t>>> grid;
    auto key = [&](double x, double y) {
      const auto i = static_cast<std::int64_t>(std::floor((x - xs_[0]) / hx_));
      const auto j = static_cast<std::int64_t>(std::floor((y - ys_[0]) / hy_));
      return j * (NX_ + 4) + i;
    };
    for (std::size_t b = 0; b < branches.size(); ++b)
      for (std::size_t k = 0; k < branches[b].points.size(); ++k)
        grid[key(branches[b].points[k].x, branches[b].points[k].y)].emplace_back(b, k);

    std::vector<bool> drop(branches.size(), false);
    for (std::size_t b = 0; b < branches.size(); ++b) {
      std::vector<std::size_t> shared(branches.size(), 0);
      for (const auto& p : branches[b].points) {
        std::vector<bool> seen(branches.size(), false);
        const auto i = static_cast<std::int64_t>(std::floor((p.x - xs_[0]) / hx_));
        const auto j = static_cast<std::int64_t>(std::floor((p.y - ys_[0]) / hy_));
        for (std::int64_t dj = -1; dj <= 1; ++dj)
          for (std::int64_t di = -1; di <= 1; ++di) {
            auto it = grid.find((j + dj) * (NX_ + 4) + (i + di));
            if (it == grid.end()) continue;
            for (auto [ob, ok] : it->second) {
              if (ob == b || drop[ob] || seen[ob]) continue;
              const auto& q = branches[ob].points[ok];
              if (std::hypot(q.x - p.x, q.y - p.y) <= tol) {
                seen[ob] = true;
                ++shared[ob];
              }
            }
          }
      }
      for (std::size_t ob = 0; ob < branches.size(); ++ob) {
        if (ob == b || drop[ob]) continue;
        if (2 * shared[ob] > branches[b].points.size() && branches[b].points.size() <= branches[ob].points.size()) {
          drop[b] = true;
          break;
        }
      }
    }
    std::vector<Branch> out;
    for (std::size_t b = 0; b < branches.size(); ++b)
      if (!drop[b]) out.push_back(std::move(branches[b]));
    return out;
  }

  std::vector<Branch> finalize(std::vector<Branch> branches) const {
    std::vector<Branch> kept;
    for (auto& b : branches) {
      if (b.points.size() < 2) continue;
      b.anchor = anchor_of(b);
      orient(b);
      kept.push_back(std::move(b));
    }
    kept = dedupe(std::move(kept));
    std::sort(kept.begin(), kept.end(), branch_less);
    return kept;
  }

  Expr e_, de_, dde_;
  Window w_;
  GridSpec g_;
  int NX_ = 0, NY_ = 0;
  int jw_lo_ = -1, jw_hi_ = -1;  // rows of cells overlapping the window
  double hx_ = 0.0, hy_ = 0.0;
  std::vector<double> xs_, ys_;
  std::vector<Sample> nodes_, centers_;
  std::vector<bool> masked_, singular_;
  std::vector<Complex> crossings_;
  std::vector<Segment> segments_;
  SliceDiagnostics diag_;
};

}  // namespace detail

/// Extracts the real slice of e over w. `expression` is the text recorded in the result;
/// it defaults to the canonical printing of e.
inline SliceSet extract_slice(const Expr& e, const Window& w, const GridSpec& g = {},
                              std::optional<std::string> expression = std::nullopt) {
  if (!w.valid()) throw SliceError("window must satisfy x_min < x_max and y_min < y_max");
  g.validate();
  return detail::Slicer(e, w, g).run(expression ? std::move(*expression) : to_string(e));
}

inline SliceSet extract_slice(std::string_view text, const Window& w, const GridSpec& g = {}) {
  return extract_slice(parse(text), w, g, std::string(text));
}

}  // namespace realslice
