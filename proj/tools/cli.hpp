#pragma once

// Command-line front end: slice | roots | catalog | verify | serve.
//
// Exit codes: 0 success, 1 usage error, 2 computation error, 3 verify failure.

#include <array>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "realslice/realslice.hpp"

namespace realslice::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kComputation = 2, kVerifyFailed = 3 };

inline constexpr int kMinGrid = 8;
inline constexpr int kMaxGrid = 4096;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string subcommand;
  std::string expression;
  Window window = standard_window();
  std::string window_text;
  std::optional<int> grid;
  int refine_iters = 3;
  unsigned threads = 0;
  std::optional<double> target;
  std::string out_path;
  std::string format = "json";          // slice: json | obj | csv
  std::string catalog_format = "table";  // catalog: table | json
  std::string function;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

inline double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw UsageError(std::string(what) + ": '" + std::string(s) + "' is not a finite number");
  return v;
}

/// Parses "x_min:x_max:y_min:y_max".
inline Window parse_window(std::string_view text) {
  std::array<double, 4> v{};
  std::size_t start = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t colon = text.find(':', start);
    const bool last = k == 3;
    if (last != (colon == std::string_view::npos))
      throw UsageError("window must have the form x_min:x_max:y_min:y_max");
    const std::string_view part = text.substr(start, last ? std::string_view::npos : colon - start);
    v[k] = parse_real(part, "window");
    start = colon + 1;
  }
  const Window w{v[0], v[1], v[2], v[3]};
  if (!w.valid()) throw UsageError("window needs x_min < x_max and y_min < y_max");
  return w;
}

inline int parse_grid(std::string_view text, std::string_view source) {
  int n = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw UsageError(std::string(source) + ": grid must be an integer");
  if (n < kMinGrid || n > kMaxGrid)
    throw UsageError(std::string(source) + ": grid must lie in [8, 4096]");
  return n;
}

/// Grid from the flag, else REALSLICE_GRID, else the default 256.
inline GridSpec grid_spec(const CliConfig& cfg) {
  GridSpec g;
  int n = g.nx;
  if (cfg.grid) {
    if (*cfg.grid < kMinGrid || *cfg.grid > kMaxGrid) throw UsageError("--grid must lie in [8, 4096]");
    n = *cfg.grid;
  } else if (const char* env = std::getenv("REALSLICE_GRID"); env != nullptr && *env != '\0') {
    n = parse_grid(env, "REALSLICE_GRID");
  }
  g.nx = g.ny = n;
  if (cfg.refine_iters < 0) throw UsageError("--refine must be non-negative");
  g.refine_iters = cfg.refine_iters;
  g.threads = cfg.threads;
  return g;
}

inline std::string fixed(double v, int digits) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  if (ec != std::errc{}) return "nan";
  std::string s(buf.data(), end);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
  return s;
}

inline std::string scientific(double v, int digits) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::scientific, digits);
  if (ec != std::errc{}) return "nan";
  return {buf.data(), end};
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string roots_table(const SliceSet& s, const std::vector<Root>& roots) {
  std::ostringstream os;
  os << pad("re", 18) << pad("im", 18) << pad("residual", 12) << pad("branch", 8) << pad("kind", 17)
     << pad("pair", 6) << "tangency\n";
  for (const auto& r : roots) {
    os << pad(fixed(r.z.real(), 10), 18) << pad(fixed(r.z.imag(), 10), 18) << pad(scientific(r.residual, 2), 12)
       << pad(std::to_string(r.branch), 8) << pad(std::string(to_string(s.branches[r.branch].kind)), 17)
       << pad(r.conjugate ? std::to_string(*r.conjugate) : "-", 6) << (r.tangency ? "yes" : "no") << "\n";
  }
  return os.str();
}

inline std::string catalog_table(const std::vector<BranchSpec>& specs) {
  std::ostringstream os;
  os << pad("kind", 17) << pad("n", 5) << pad("anchor", 16) << pad("t_min", 16) << pad("t_max", 16) << "value\n";
  for (const auto& b : specs) {
    os << pad(std::string(to_string(b.kind)), 17) << pad(std::to_string(b.n), 5)
       << pad(b.anchor ? fixed(*b.anchor, 10) : "-", 16) << pad(fixed(b.t_min, 10), 16) << pad(fixed(b.t_max, 10), 16)
       << branch_rule(b) << "\n";
  }
  return os.str();
}

inline std::string catalog_json(FunctionId fn, const Window& w, const std::vector<BranchSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : specs) {
    nlohmann::json j{{"kind", std::string(to_string(b.kind))}, {"n", b.n}, {"t_min", b.t_min}, {"t_max", b.t_max},
                     {"value", branch_rule(b)}};
    j["anchor"] = b.anchor ? nlohmann::json(*b.anchor) : nlohmann::json(nullptr);
    arr.push_back(j);
  }
  nlohmann::json doc{{"function", std::string(to_string(fn))},
                     {"window", {{"x_min", w.x_min}, {"x_max", w.x_max}, {"y_min", w.y_min}, {"y_max", w.y_max}}},
                     {"branches", arr}};
  return doc.dump(1) + "\n";
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << bytes;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// HTTP service

namespace detail {

inline std::string error_json(const std::string& message, std::optional<std::size_t> offset = std::nullopt) {
  nlohmann::json j{{"error", message}};
  if (offset) j["offset"] = *offset;
  return j.dump();
}

struct RequestPlan {
  Expr expr;
  std::string text;
  Window window;
  GridSpec grid;
};

inline RequestPlan plan_request(const httplib::Request& req) {
  if (!req.has_param("expr")) throw UsageError("missing query parameter 'expr'");
  CliConfig cfg;
  if (req.has_param("window")) cfg.window = parse_window(req.get_param_value("window"));
  if (req.has_param("grid")) cfg.grid = parse_grid(req.get_param_value("grid"), "grid");
  const std::string text = req.get_param_value("expr");
  return {parse(text), text, cfg.window, grid_spec(cfg)};
}

template <class Fn>
void respond(httplib::Response& res, Fn&& compute) {
  try {
    res.set_content(compute(), std::string(kCurveSetMediaType));
  } catch (const ParseError& ex) {
    res.status = 400;
    res.set_content(error_json(ex.what(), ex.offset()), "application/json");
  } catch (const UsageError& ex) {
    res.status = 400;
    res.set_content(error_json(ex.what()), "application/json");
  } catch (const std::exception& ex) {
    res.status = 422;
    res.set_content(error_json(ex.what()), "application/json");
  }
}

}  // namespace detail

/// Registers the API routes, and the viewer bundle when `static_dir` exists.
/// Every request builds its own pipeline; nothing is shared between requests.
inline void install_routes(httplib::Server& server, const std::string& static_dir = {}) {
  server.Get("/api/slice", [](const httplib::Request& req, httplib::Response& res) {
    detail::respond(res, [&] {
      const auto plan = detail::plan_request(req);
      return write_document(extract_slice(plan.expr, plan.window, plan.grid, plan.text));
    });
  });
  server.Get("/api/roots", [](const httplib::Request& req, httplib::Response& res) {
    detail::respond(res, [&] {
      const auto plan = detail::plan_request(req);
      if (!req.has_param("target")) throw UsageError("missing query parameter 'target'");
      const double w = parse_real(req.get_param_value("target"), "target");
      const SliceSet s = extract_slice(plan.expr, plan.window, plan.grid, plan.text);
      return write_document(s, solve_level(plan.expr, w, s));
    });
  });
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir) && server.set_mount_point("/", static_dir))
    return;
  server.Get("/", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("realslice\n\nGET /api/slice?expr=&window=&grid=\nGET /api/roots?expr=&target=&window=&grid=\n",
                    "text/plain");
  });
}

// ---------------------------------------------------------------------------

inline int run_slice(const CliConfig& cfg, std::ostream& out) {
  const Expr e = parse(cfg.expression);
  const SliceSet s = extract_slice(e, cfg.window, grid_spec(cfg), cfg.expression);
  if (cfg.format == "json") {
    const std::string doc = write_document(s);
    if (cfg.out_path.empty()) out << doc;
    else write_file(cfg.out_path, doc);
  } else if (cfg.format == "obj") {
    const std::string obj = write_polylines(s);
    if (cfg.out_path.empty()) out << obj;
    else write_file(cfg.out_path, obj);
  } else {
    if (cfg.out_path.empty()) {
      for (std::size_t i = 0; i < s.branches.size(); ++i)
        out << "# branch " << i << " " << to_string(s.branches[i].kind) << "\n" << write_csv(s.branches[i]) << "\n";
    } else {
      const std::filesystem::path p(cfg.out_path);
      for (std::size_t i = 0; i < s.branches.size(); ++i) {
        const auto name = p.parent_path() / (p.stem().string() + "_" + std::to_string(i) + p.extension().string());
        write_file(name.string(), write_csv(s.branches[i]));
      }
    }
  }
  return kOk;
}

inline int run_roots(const CliConfig& cfg, std::ostream& out) {
  const Expr e = parse(cfg.expression);
  const SliceSet s = extract_slice(e, cfg.window, grid_spec(cfg), cfg.expression);
  const auto roots = solve_level(e, *cfg.target, s);
  out << roots_table(s, roots);
  if (!cfg.out_path.empty()) write_file(cfg.out_path, write_document(s, roots));
  return kOk;
}

inline int run_catalog(const CliConfig& cfg, std::ostream& out) {
  const FunctionId fn = function_id_from_string(cfg.function);
  const auto specs = enumerate_branches(fn, cfg.window);
  const std::string text = cfg.catalog_format == "json" ? catalog_json(fn, cfg.window, specs) : catalog_table(specs);
  if (cfg.out_path.empty()) out << text;
  else write_file(cfg.out_path, text);
  return kOk;
}

inline int run_verify(const CliConfig& cfg, std::ostream& out) {
  bool all = true;
  for (const auto& c : run_oracle_suite(grid_spec(cfg))) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.pass;
  }
  return all ? kOk : kVerifyFailed;
}

inline httplib::Server*& active_server() {
  static httplib::Server* server = nullptr;
  return server;
}

inline int run_serve(const CliConfig& cfg, std::ostream& err) {
  httplib::Server server;
  install_routes(server, cfg.static_dir);
  active_server() = &server;
  err << "serving on http://" << cfg.host << ":" << cfg.port << "\n";
  const bool ok = server.listen(cfg.host, cfg.port);
  active_server() = nullptr;
  if (!ok) {
    err << "error: could not listen on " << cfg.host << ":" << cfg.port << "\n";
    return kComputation;
  }
  return kOk;
}

/// Runs one invocation. args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-slice analyzer for complex functions with real coefficients", "realslice"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto common = [&](CLI::App* sub, bool needs_expr) {
    auto* opt = sub->add_option("--expr,-e", cfg.expression, "Expression in z, e.g. \"sin(z)+2\"");
    if (needs_expr) opt->required();
    sub->add_option("--window,-w", cfg.window_text, "x_min:x_max:y_min:y_max (default -2pi:2pi:-3:3)");
    sub->add_option("--grid,-g", cfg.grid, "Cells per axis, 8..4096 (default 256 or $REALSLICE_GRID)");
    sub->add_option("--refine", cfg.refine_iters, "Newton refinement iterations per vertex")->default_val(3);
    sub->add_option("--threads", cfg.threads, "Sampling threads, 0 = all cores")->default_val(0);
  };

  auto* slice = app.add_subcommand("slice", "Extract the real slice as curves");
  common(slice, true);
  slice->add_option("--out,-o", cfg.out_path, "Output file (stdout when omitted)");
  slice->add_option("--format,-f", cfg.format, "json | obj | csv")
      ->default_val("json")
      ->check(CLI::IsMember({"json", "obj", "csv"}));

  auto* roots = app.add_subcommand("roots", "Solve f(z) = target on the real slice");
  common(roots, true);
  roots->add_option("--target,-t", cfg.target, "Real target value w")->required();
  roots->add_option("--out,-o", cfg.out_path, "Also write the curve-set document with roots");

  auto* catalog = app.add_subcommand("catalog", "Closed-form branches of sin, sec, cosh or exp");
  catalog->add_option("--function,-F", cfg.function, "sin | sec | cosh | exp")
      ->required()
      ->check(CLI::IsMember({"sin", "sec", "cosh", "exp"}));
  catalog->add_option("--window,-w", cfg.window_text, "x_min:x_max:y_min:y_max");
  catalog->add_option("--format,-f", cfg.catalog_format, "table | json")
      ->default_val("table")
      ->check(CLI::IsMember({"table", "json"}));
  catalog->add_option("--out,-o", cfg.out_path, "Output file (stdout when omitted)");

  auto* verify = app.add_subcommand("verify", "Check the slicer against the closed-form catalog");
  verify->add_option("--grid,-g", cfg.grid, "Cells per axis (default 256 or $REALSLICE_GRID)");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API until interrupted");
  serve->add_option("--host", cfg.host, "Bind address")->default_val("127.0.0.1");
  serve->add_option("--port,-p", cfg.port, "Port")->default_val(8080);
  serve->add_option("--static", cfg.static_dir, "Viewer bundle directory served at /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!cfg.window_text.empty()) cfg.window = parse_window(cfg.window_text);
    if (slice->parsed()) return run_slice(cfg, out);
    if (roots->parsed()) return run_roots(cfg, out);
    if (catalog->parsed()) return run_catalog(cfg, out);
    if (verify->parsed()) return run_verify(cfg, out);
    if (serve->parsed()) return run_serve(cfg, err);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const ParseError& ex) {
    err << "usage error: expression: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kComputation;
  }
  return kUsage;
}

}  // namespace realslice::cli
