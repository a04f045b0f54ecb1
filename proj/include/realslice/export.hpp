#pragma once

// Serialization of slices and roots.
//
//   curve-set document  JSON, sorted keys, shortest round-trip floats, format_version "1"
//   polylines           OBJ text; vertex (x, y, z) = (Re z, Im z, Re f), one `l` per branch
//   csv                 one table per branch with columns x,y,v
//
// The schema is documented in docs/curveset.md.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "realslice/expr.hpp"
#include "realslice/roots.hpp"
#include "realslice/slicer.hpp"
#include "realslice/types.hpp"

namespace realslice {

inline constexpr std::string_view kFormatVersion = "1";
inline constexpr std::string_view kCurveSetMediaType = "application/vnd.realslice.curveset+json";

class DocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurveSetDocument {
  SliceSet slice;
  std::vector<Root> roots;
};

namespace detail {

using nlohmann::json;

inline json window_json(const Window& w) {
  return {{"x_min", w.x_min}, {"x_max", w.x_max}, {"y_min", w.y_min}, {"y_max", w.y_max}};
}

inline json grid_json(const GridSpec& g) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"refine_iters", g.refine_iters}, {"im_tol", g.im_tol}, {"pole_cap", g.pole_cap}};
}

inline json branch_json(const Branch& b) {
  json xs = json::array(), ys = json::array(), vs = json::array();
  for (const auto& p : b.points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
    vs.push_back(p.v);
  }
  json out{{"kind", std::string(to_string(b.kind))}, {"closed", b.closed}, {"x", xs}, {"y", ys}, {"v", vs}};
  out["anchor"] = b.anchor ? json(*b.anchor) : json(nullptr);
  return out;
}

inline json root_json(const Root& r) {
  json out{{"re", r.z.real()},         {"im", r.z.imag()},         {"residual", r.residual},
           {"branch", r.branch},        {"tangency", r.tangency},   {"verified", r.newton_verified}};
  out["pair"] = r.conjugate ? json(*r.conjugate) : json(nullptr);
  return out;
}

inline json diagnostics_json(const SliceDiagnostics& d) {
  return {{"cells", d.cells},
          {"masked_pole_cells", d.masked_pole_cells},
          {"singular_cells", d.singular_cells},
          {"crossings", d.crossings},
          {"dropped_points", d.dropped_points}};
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DocumentError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw DocumentError(std::string("bad field '") + key + "': " + ex.what());
  }
}

}  // namespace detail

/// Canonical curve-set document. Equal inputs give byte-identical output.
inline std::string write_document(const SliceSet& s, const std::vector<Root>& roots = {}) {
  using detail::json;
  json branches = json::array();
  for (const auto& b : s.branches) branches.push_back(detail::branch_json(b));
  json rs = json::array();
  for (const auto& r : roots) rs.push_back(detail::root_json(r));

  json doc{{"format_version", std::string(kFormatVersion)},
           {"expression", s.expression},
           {"window", detail::window_json(s.window)},
           {"grid", detail::grid_json(s.grid)},
           {"branches", branches},
           {"roots", rs},
           {"diagnostics", detail::diagnostics_json(s.diagnostics)},
           {"scene", {{"x", "Re z"}, {"y", "Im z"}, {"height", "Re f(z)"}}}};
  return doc.dump(1) + "\n";
}

inline CurveSetDocument read_document(std::string_view text) {
  using detail::field;
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& ex) {
    throw DocumentError(std::string("not a JSON document: ") + ex.what());
  }
  if (field<std::string>(doc, "format_version") != kFormatVersion)
    throw DocumentError("unsupported format_version");

  CurveSetDocument out;
  SliceSet& s = out.slice;
  s.expression = field<std::string>(doc, "expression");
  const json& w = doc.at("window");
  s.window = {field<double>(w, "x_min"), field<double>(w, "x_max"), field<double>(w, "y_min"), field<double>(w, "y_max")};
  const json& g = doc.at("grid");
  s.grid.nx = field<int>(g, "nx");
  s.grid.ny = field<int>(g, "ny");
  s.grid.refine_iters = field<int>(g, "refine_iters");
  s.grid.im_tol = field<double>(g, "im_tol");
  s.grid.pole_cap = field<double>(g, "pole_cap");

  for (const json& jb : field<json>(doc, "branches")) {
    Branch b;
    const auto kind = branch_kind_from_string(field<std::string>(jb, "kind"));
    if (!kind) throw DocumentError("unknown branch kind");
    b.kind = *kind;
    b.closed = field<bool>(jb, "closed");
    if (!jb.contains("anchor")) throw DocumentError("missing field 'anchor'");
    if (!jb.at("anchor").is_null()) b.anchor = field<double>(jb, "anchor");
    const auto xs = field<std::vector<double>>(jb, "x");
    const auto ys = field<std::vector<double>>(jb, "y");
    const auto vs = field<std::vector<double>>(jb, "v");
    if (xs.size() != ys.size() || xs.size() != vs.size()) throw DocumentError("branch point arrays differ in length");
    for (std::size_t i = 0; i < xs.size(); ++i) b.points.push_back({xs[i], ys[i], vs[i]});
    s.branches.push_back(std::move(b));
  }

  for (const json& jr : field<json>(doc, "roots")) {
    Root r;
    r.z = {field<double>(jr, "re"), field<double>(jr, "im")};
    r.residual = field<double>(jr, "residual");
    r.branch = field<std::size_t>(jr, "branch");
    r.tangency = field<bool>(jr, "tangency");
    r.newton_verified = field<bool>(jr, "verified");
    if (!jr.contains("pair")) throw DocumentError("missing field 'pair'");
    if (!jr.at("pair").is_null()) r.conjugate = field<std::size_t>(jr, "pair");
    out.roots.push_back(r);
  }

  const json& d = doc.at("diagnostics");
  s.diagnostics.cells = field<std::size_t>(d, "cells");
  s.diagnostics.masked_pole_cells = field<std::size_t>(d, "masked_pole_cells");
  s.diagnostics.singular_cells = field<std::size_t>(d, "singular_cells");
  s.diagnostics.crossings = field<std::size_t>(d, "crossings");
  s.diagnostics.dropped_points = field<std::size_t>(d, "dropped_points");
  return out;
}

/// OBJ polylines. Vertices are (Re z, Im z, Re f): the output is the height axis.
inline std::string write_polylines(const SliceSet& s) {
  using detail::format_double;
  std::string out;
  out += "# realslice polylines, format " + std::string(kFormatVersion) + "\n";
  out += "# expression: " + s.expression + "\n";
  out += "# vertex = (Re z, Im z, Re f(z))\n";
  std::size_t next = 1;
  for (const auto& b : s.branches) {
    const std::size_t first = next;
    for (const auto& p : b.points) {
      out += "v " + format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.v) + "\n";
      ++next;
    }
    out += "l";
    for (std::size_t i = first; i < next; ++i) out += " " + std::to_string(i);
    if (b.closed && next > first) out += " " + std::to_string(first);
    out += "\n";
  }
  return out;
}

inline std::string write_csv(const Branch& b) {
  using detail::format_double;
  std::string out = "x,y,v\n";
  for (const auto& p : b.points) out += format_double(p.x) + "," + format_double(p.y) + "," + format_double(p.v) + "\n";
  return out;
}

}  // namespace realslice
