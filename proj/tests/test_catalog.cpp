#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "realslice/catalog.hpp"

namespace {

using namespace realslice;
using std::numbers::pi;

std::vector<double> anchors(const std::vector<BranchSpec>& specs, BranchKind kind) {
  std::vector<double> out;
  for (const auto& b : specs)
    if (b.kind == kind) out.push_back(*b.anchor);
  return out;
}

std::size_t count(const std::vector<BranchSpec>& specs, BranchKind kind) {
  return static_cast<std::size_t>(std::count_if(specs.begin(), specs.end(), [&](const auto& b) { return b.kind == kind; }));
}

TEST(Enumerate, SinStandardWindow) {
  const auto specs = enumerate_branches(FunctionId::sin, standard_window());
  ASSERT_EQ(specs.size(), 5u);
  EXPECT_EQ(count(specs, BranchKind::real_axis), 1u);
  const auto v = anchors(specs, BranchKind::vertical_line);
  ASSERT_EQ(v.size(), 4u);
  const double expected[] = {-3 * pi / 2, -pi / 2, pi / 2, 3 * pi / 2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i], expected[i], 1e-15);
}

TEST(Enumerate, ExpHorizontals) {
  const auto specs = enumerate_branches(FunctionId::exp, {-2, 2, -7, 7});
  ASSERT_EQ(specs.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(specs[i].kind, BranchKind::horizontal_line);
    EXPECT_EQ(specs[i].n, i - 2);
    EXPECT_NEAR(*specs[i].anchor, (i - 2) * pi, 1e-15);
    EXPECT_DOUBLE_EQ(branch_value(specs[i], 0.5), ((i % 2 == 0) ? 1.0 : -1.0) * std::exp(0.5));
  }
}

TEST(Enumerate, CoshNarrowWindowHasNoHorizontals) {
  const auto specs = enumerate_branches(FunctionId::cosh, {-2, 2, -0.5, 0.5});
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].kind, BranchKind::real_axis);
  EXPECT_EQ(specs[1].kind, BranchKind::vertical_line);
  EXPECT_EQ(*specs[1].anchor, 0.0);
}

TEST(Enumerate, SecRealAxisSplitsAtPoles) {
  const auto specs = enumerate_branches(FunctionId::sec, {-pi, pi, -2, 2});
  ASSERT_EQ(count(specs, BranchKind::real_axis), 3u);
  EXPECT_NEAR(specs[0].t_max, -pi / 2, 1e-15);
  EXPECT_NEAR(specs[1].t_min, -pi / 2, 1e-15);
  EXPECT_NEAR(specs[1].t_max, pi / 2, 1e-15);
  const auto v = anchors(specs, BranchKind::vertical_line);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_NEAR(v[0], -pi, 1e-15);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_NEAR(v[2], pi, 1e-15);
}

TEST(Enumerate, AnchorOnWindowEdgeIsIncluded) {
  const auto specs = enumerate_branches(FunctionId::sin, {pi / 2, 2.0, -1, 1});
  EXPECT_EQ(anchors(specs, BranchKind::vertical_line).size(), 1u);
  EXPECT_THROW(enumerate_branches(FunctionId::sin, {1, 0, 0, 1}), CatalogError);
}

BranchSpec vertical(FunctionId fn, int n, double x0) { return {fn, BranchKind::vertical_line, x0, n, -3, 3}; }

TEST(BranchValue, SecNegativeSech) {
  // -sech(1) = -2 / (e + 1/e)
  const double oracle = -2.0 / (std::exp(1.0) + std::exp(-1.0));
  EXPECT_NEAR(branch_value(vertical(FunctionId::sec, 1, pi), 1.0), oracle, 1e-15);
  EXPECT_NEAR(oracle, -0.6480542737, 1e-10);
}

TEST(BranchValue, Examples) {
  EXPECT_NEAR(branch_value(vertical(FunctionId::cosh, 0, 0.0), pi), -1.0, 1e-15);
  EXPECT_EQ(branch_value(vertical(FunctionId::sin, 0, pi / 2), 0.0), 1.0);
  // sin(3pi/2) cosh(arccosh 2), both factors from the real formula.
  const double t = std::log(2.0 + std::sqrt(3.0));
  const double oracle = std::sin(3 * pi / 2) * std::cosh(t);
  EXPECT_NEAR(branch_value(vertical(FunctionId::sin, 1, 3 * pi / 2), t), oracle, 1e-14);
  EXPECT_NEAR(oracle, -2.0, 1e-14);
}

TEST(BranchValue, SecPoleThrows) {
  const BranchSpec axis{FunctionId::sec, BranchKind::real_axis, std::nullopt, 0, -1, pi / 2};
  EXPECT_THROW(branch_value(axis, pi / 2), CatalogError);
}

TEST(BranchValue, Rules) {
  const auto specs = enumerate_branches(FunctionId::cosh, {-2, 2, -4, 4});
  std::vector<std::string> rules;
  for (const auto& b : specs) rules.push_back(branch_rule(b));
  EXPECT_EQ(rules, (std::vector<std::string>{"cosh(x)", "cos(y)", "-cosh(x)", "-cosh(x)"}));
}

// Every catalog point lies on the slice of the evaluator, with the tabulated value.
TEST(Consistency, AgreesWithEvaluator) {
  for (FunctionId fn : {FunctionId::sin, FunctionId::sec, FunctionId::cosh, FunctionId::exp}) {
    const Expr e = catalog_expression(fn);
    for (const auto& b : enumerate_branches(fn, standard_window())) {
      const auto poles = real_axis_poles(fn, b.t_min, b.t_max);
      for (int k = 0; k < 1000; ++k) {
        const double t = b.t_min + (b.t_max - b.t_min) * k / 999.0;
        if (std::any_of(poles.begin(), poles.end(), [&](double p) { return std::abs(t - p) < 1e-3; })) continue;
        const auto r = eval(e, b.point(t));
        ASSERT_TRUE(r.ok());
        const double v = branch_value(b, t);
        EXPECT_LT(std::abs(r.value.imag()), 1e-12 * std::max(1.0, std::abs(v))) << to_string(fn) << " t=" << t;
        EXPECT_LT(std::abs(r.value.real() - v), 1e-12 * std::max(1.0, std::abs(v))) << to_string(fn) << " t=" << t;
      }
    }
  }
}

TEST(Consistency, ExpPeriodicity) {
  const auto specs = enumerate_branches(FunctionId::exp, {-2, 2, -10, 10});
  for (const auto& b : specs) {
    for (double x : {-1.5, 0.0, 0.7, 2.0}) {
      const double base = std::exp(x);
      EXPECT_EQ(branch_value(b, x), (b.n % 2 == 0) ? base : -base) << "n=" << b.n;
    }
  }
}

// Value range of each branch, sampled densely, merged into a covering check.
bool covers(FunctionId fn, const Window& w, double value) {
  for (const auto& b : enumerate_branches(fn, w)) {
    double prev = NAN;
    const auto poles = real_axis_poles(fn, b.t_min, b.t_max);
    for (int k = 0; k <= 20000; ++k) {
      const double t = b.t_min + (b.t_max - b.t_min) * k / 20000.0;
      if (std::any_of(poles.begin(), poles.end(), [&](double p) { return std::abs(t - p) < 1e-3; })) {
        prev = NAN;  // never bridge a pole
        continue;
      }
      const double v = branch_value(b, t);
      if (!std::isnan(prev) && (prev - value) * (v - value) <= 0.0) return true;
      prev = v;
    }
  }
  return false;
}

TEST(RangeCoverage, SecMissesOnlyZero) {
  const Window w{-pi, pi, -8, 8};
  for (double v = -20.0; v <= 20.0; v += 0.37) {
    if (std::abs(v) < 1e-3) continue;
    EXPECT_TRUE(covers(FunctionId::sec, w, v)) << v;
  }
  EXPECT_FALSE(covers(FunctionId::sec, w, 0.0));
}

TEST(RangeCoverage, CoshCoversEverything) {
  const Window w{-4, 4, -4, 4};
  for (double v = -20.0; v <= 20.0; v += 0.37) EXPECT_TRUE(covers(FunctionId::cosh, w, v)) << v;
}

TEST(Ids, RoundTrip) {
  for (FunctionId fn : {FunctionId::sin, FunctionId::sec, FunctionId::cosh, FunctionId::exp})
    EXPECT_EQ(function_id_from_string(to_string(fn)), fn);
  EXPECT_THROW(function_id_from_string("tan"), CatalogError);
}

}  // namespace
