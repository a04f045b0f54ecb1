#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cli.hpp"

namespace {

namespace fs = std::filesystem;
using realslice::cli::run;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("realslice_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, SliceWritesDocument) {
  const auto r = invoke({"slice", "--expr", "sin(z)+2", "--window", "-6.2832:6.2832:-3:3", "--out", path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = realslice::read_document(slurp(path("s.json")));
  EXPECT_EQ(doc.slice.expression, "sin(z)+2");
  EXPECT_EQ(doc.slice.branches.size(), 5u);
}

TEST_F(Cli, RootsPrintsEulerRows) {
  const auto r = invoke({"roots", "--expr", "exp(z)+1", "--target", "0", "--window", "-2:2:-7:7"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("-3.1415926536"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("3.1415926536"), std::string::npos);
  std::istringstream lines(r.out);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 3);  // header + two roots
}

TEST_F(Cli, RootsCanWriteDocument) {
  const auto r = invoke({"roots", "--expr", "sin(z)+2", "--target", "0", "--out", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(realslice::read_document(slurp(path("r.json"))).roots.size(), 4u);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--window", "5:1:0:1"}).code, 1);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--window", "1:2:3"}).code, 1);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--grid", "4"}).code, 1);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--grid", "5000"}).code, 1);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z"}).code, 1);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--format", "png"}).code, 1);
  EXPECT_EQ(invoke({"roots", "--expr", "sin(z)"}).code, 1);
  EXPECT_EQ(invoke({"catalog", "--function", "tan"}).code, 1);
  EXPECT_EQ(invoke({"bogus"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
  const auto r = invoke({"slice", "--expr", "sin(z)", "--window", "5:1:0:1"});
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("window"), std::string::npos);
}

TEST_F(Cli, ComputationErrors) {
  EXPECT_EQ(invoke({"slice", "--expr", "1/(z-z)"}).code, 2);
  EXPECT_EQ(invoke({"slice", "--expr", "sin(z)", "--out", path("missing/dir/s.json")}).code, 2);
}

TEST_F(Cli, GridFromEnvironment) {
  ::setenv("REALSLICE_GRID", "64", 1);
  const auto r = invoke({"slice", "--expr", "sin(z)"});
  ::setenv("REALSLICE_GRID", "abc", 1);
  const auto bad = invoke({"slice", "--expr", "sin(z)"});
  ::unsetenv("REALSLICE_GRID");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["grid"]["nx"], 64);
  EXPECT_EQ(bad.code, 1);
}

TEST_F(Cli, Formats) {
  const auto obj = invoke({"slice", "--expr", "sin(z)", "--format", "obj", "--grid", "64"});
  ASSERT_EQ(obj.code, 0);
  EXPECT_EQ(obj.out.rfind("# realslice polylines", 0), 0u);
  ASSERT_EQ(invoke({"slice", "--expr", "sin(z)", "--format", "csv", "--grid", "64", "--out", path("b.csv")}).code, 0);
  for (int i = 0; i < 5; ++i) {
    const auto text = slurp(path("b_" + std::to_string(i) + ".csv"));
    EXPECT_EQ(text.rfind("x,y,v\n", 0), 0u) << i;
  }
  EXPECT_FALSE(fs::exists(path("b_5.csv")));
}

TEST_F(Cli, Catalog) {
  const auto table = invoke({"catalog", "--function", "sec", "--window", "-3.1416:3.1416:-2:2"});
  ASSERT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("-sech(y)"), std::string::npos);
  const auto json = invoke({"catalog", "--function", "exp", "--window", "-2:2:-7:7", "--format", "json"});
  ASSERT_EQ(json.code, 0);
  EXPECT_EQ(nlohmann::json::parse(json.out)["branches"].size(), 5u);
}

TEST_F(Cli, Verify) {
  const auto r = invoke({"verify"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("PASS sin geometry"), std::string::npos);
  // A coarse grid cannot reach the geometry tolerance.
  EXPECT_EQ(invoke({"verify", "--grid", "8"}).code, 3);
}

TEST_F(Cli, DeterministicOutput) {
  const std::vector<std::string> args{"slice", "--expr", "sec(z)*sin(z)", "--threads", "1"};
  const auto a = invoke(args);
  auto b_args = args;
  b_args.back() = "4";
  const auto b = invoke(b_args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  ASSERT_EQ(invoke({"slice", "--expr", "cosh(z)", "--out", path("1.json")}).code, 0);
  ASSERT_EQ(invoke({"slice", "--expr", "cosh(z)", "--out", path("2.json")}).code, 0);
  EXPECT_EQ(slurp(path("1.json")), slurp(path("2.json")));
}

TEST(ParseWindow, Forms) {
  const auto w = realslice::cli::parse_window("-2:2:-7.5:7");
  EXPECT_EQ(w, (realslice::Window{-2, 2, -7.5, 7}));
  EXPECT_THROW(realslice::cli::parse_window("1:1:0:1"), realslice::cli::UsageError);
  EXPECT_THROW(realslice::cli::parse_window("a:1:0:1"), realslice::cli::UsageError);
  EXPECT_THROW(realslice::cli::parse_window("0:1:0:1:5"), realslice::cli::UsageError);
}

class Serve : public ::testing::Test {
 protected:
  void start(const std::string& static_dir = {}) {
    realslice::cli::install_routes(server_, static_dir);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(Serve, SliceEndpoint) {
  start();
  auto res = client().Get("/api/slice?expr=sin(z)%2B2&window=-6.2832:6.2832:-3:3&grid=128");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), std::string(realslice::kCurveSetMediaType));
  const auto doc = realslice::read_document(res->body);
  EXPECT_EQ(doc.slice.expression, "sin(z)+2");
  EXPECT_EQ(doc.slice.grid.nx, 128);
  EXPECT_EQ(doc.slice.branches.size(), 5u);
  EXPECT_TRUE(doc.roots.empty());
}

TEST_F(Serve, RootsEndpointMatchesLibrary) {
  start();
  auto res = client().Get("/api/roots?expr=sin(z)%2B2&target=0");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const realslice::Expr e = realslice::parse("sin(z)+2");
  const auto s = realslice::extract_slice(e, realslice::standard_window(), {}, "sin(z)+2");
  EXPECT_EQ(res->body, realslice::write_document(s, realslice::solve_level(e, 0.0, s)));
}

TEST_F(Serve, Errors) {
  start();
  auto c = client();
  auto bad_expr = c.Get("/api/slice?expr=sin(z");
  ASSERT_TRUE(bad_expr);
  EXPECT_EQ(bad_expr->status, 400);
  EXPECT_EQ(nlohmann::json::parse(bad_expr->body)["offset"], 5);
  EXPECT_EQ(c.Get("/api/slice")->status, 400);
  EXPECT_EQ(c.Get("/api/slice?expr=z&window=5:1:0:1")->status, 400);
  EXPECT_EQ(c.Get("/api/roots?expr=z")->status, 400);
  EXPECT_EQ(c.Get("/api/slice?expr=1/(z-z)")->status, 422);
}

TEST_F(Serve, ConcurrentRequests) {
  start();
  std::vector<std::future<std::string>> jobs;
  for (const char* q : {"/api/slice?expr=sin(z)&grid=64", "/api/slice?expr=cosh(z)&grid=64",
                        "/api/slice?expr=sin(z)&grid=64", "/api/roots?expr=exp(z)%2B1&target=0&window=-2:2:-7:7"}) {
    jobs.push_back(std::async(std::launch::async, [this, q] {
      auto res = client().Get(q);
      return res ? res->body : std::string();
    }));
  }
  std::vector<std::string> bodies;
  for (auto& j : jobs) bodies.push_back(j.get());
  EXPECT_EQ(bodies[0], bodies[2]);
  EXPECT_NE(bodies[0], bodies[1]);
  EXPECT_EQ(realslice::read_document(bodies[3]).roots.size(), 2u);
}

TEST_F(Serve, RootPageWithoutBundle) {
  start();
  auto res = client().Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("/api/slice"), std::string::npos);
}

TEST_F(Serve, RootPageServesBundle) {
  const fs::path dir = fs::temp_directory_path() / ("realslice_bundle_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::ofstream(dir / "index.html") << "<!doctype html><title>viewer</title>";
  start(dir.string());
  auto res = client().Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find("viewer"), std::string::npos);
  EXPECT_EQ(client().Get("/api/slice?expr=z&grid=16")->status, 200);
  fs::remove_all(dir);
}

}  // namespace
