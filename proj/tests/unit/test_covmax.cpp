#include "mcuq/covmax.hpp"
#include "mcuq/normal.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mcuq;

namespace {

AllocationProblem problem(std::vector<double> s, double budget) {
  AllocationProblem p;
  for (std::size_t e = 0; e < s.size(); ++e) {
    p.entries.push_back({0, static_cast<Index>(e)});
    p.center.push_back(static_cast<double>(e));
  }
  p.s = std::move(s);
  p.budget = budget;
  return p;
}

double kkt_residual(const IntervalAllocation& a, const AllocationProblem& p) {
  double worst = 0.0;
  for (std::size_t e = 0; e < p.s.size(); ++e) {
    const double len = a.intervals[e].length();
    const double g = coverage_marginal(len, p.s[e]);
    if (len > 0.0) {
      worst = std::max(worst, std::abs(g - a.multiplier));
    } else {
      worst = std::max(worst, g - a.multiplier);
    }
  }
  return worst;
}

}  // namespace

TEST(ExpectedCoverage, Basics) {
  const auto p = problem({1.0}, 0.0);
  IntervalAllocation a;
  a.entries = p.entries;
  a.intervals = {{0.0, 0.0}};
  EXPECT_EQ(expected_coverage(a, p.center, p.s), 0.0);
  a.intervals = {{-1.959964, 1.959964}};
  EXPECT_NEAR(expected_coverage(a, p.center, p.s), 0.95, 1e-5);
  a.intervals = {{-1e6, 1e6}};
  EXPECT_EQ(expected_coverage(a, p.center, p.s), 1.0);
}

TEST(Allocate, ZeroBudget) {
  const auto p = problem({1.0, 2.0, 0.5}, 0.0);
  const IntervalAllocation a = allocate(p);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.intervals[e].lo, p.center[e]);
    EXPECT_EQ(a.intervals[e].hi, p.center[e]);
  }
  EXPECT_EQ(a.expected_coverage, 0.0);
}

TEST(Allocate, EqualVariancesSplitEvenly) {
  const auto p = problem({1.3, 1.3}, 5.0);
  const IntervalAllocation a = allocate(p);
  EXPECT_NEAR(a.intervals[0].length(), 2.5, 1e-12);
  EXPECT_NEAR(a.intervals[1].length(), 2.5, 1e-12);
}

TEST(Allocate, SingleEntryAnalytic) {
  const IntervalAllocation a = allocate(problem({1.0}, 3.919928));
  EXPECT_NEAR(a.expected_coverage, 0.95, 1e-4);
}

TEST(Allocate, UsesBudget) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ud(0.1, 5.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(1 + gen() % 20);
    for (double& x : s) x = ud(gen);
    const double budget = ud(gen) * static_cast<double>(s.size());
    const IntervalAllocation a = allocate(problem(s, budget));
    EXPECT_LE(a.total_length, budget * (1 + 1e-12));
    EXPECT_NEAR(a.total_length, budget, 1e-9 * budget);
  }
}

TEST(Allocate, KktMarginalEquality) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> ud(0.05, 4.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(2 + gen() % 10);
    for (double& x : s) x = ud(gen);
    const auto p = problem(s, ud(gen) * static_cast<double>(s.size()));
    EXPECT_LT(kkt_residual(allocate(p), p), 1e-6);
  }
}

TEST(Allocate, AtLeastGreedyOracle) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(0.1, 3.0);
  for (int t = 0; t < 40; ++t) {
    std::vector<double> s(1 + gen() % 6);
    for (double& x : s) x = ud(gen);
    const auto p = problem(s, ud(gen) * 2.0 * static_cast<double>(s.size()));
    EXPECT_GE(allocate(p).expected_coverage, allocate_greedy(p, 20000).expected_coverage - 1e-4);
  }
}

TEST(Allocate, AtLeastBruteForce) {
  const std::vector<std::vector<double>> cases{{0.4, 1.0, 2.5}, {1.0, 3.0}, {0.2, 0.2, 5.0}, {2.0}};
  for (const auto& s : cases) {
    for (double budget : {0.5, 2.0, 6.0}) {
      const double brute = oracle::brute_force_coverage(s, budget, budget / 300.0);
      EXPECT_GE(allocate(problem(s, budget)).expected_coverage, brute - 1e-9);
    }
  }
}

TEST(Allocate, MonotoneInBudget) {
  const std::vector<double> s{0.3, 1.0, 2.0, 4.0};
  double prev = -1.0;
  for (double budget = 0.0; budget <= 40.0; budget += 0.5) {
    const double cov = allocate(problem(s, budget)).expected_coverage;
    EXPECT_GE(cov, prev - 1e-12);
    prev = cov;
  }
}

TEST(Allocate, ScaleEquivariant) {
  const std::vector<double> s{0.3, 1.0, 2.0};
  const IntervalAllocation a = allocate(problem(s, 4.0));
  std::vector<double> scaled;
  for (double x : s) scaled.push_back(10.0 * x);
  const IntervalAllocation b = allocate(problem(scaled, 40.0));
  EXPECT_NEAR(a.expected_coverage, b.expected_coverage, 1e-12);
  for (std::size_t e = 0; e < s.size(); ++e)
    EXPECT_NEAR(b.intervals[e].length(), 10.0 * a.intervals[e].length(), 1e-9);
}

TEST(Allocate, PrefersPreciseEntriesUnderTightBudget) {
  const IntervalAllocation a = allocate(problem({0.1, 10.0}, 0.5));
  EXPECT_GT(a.intervals[0].length(), a.intervals[1].length());
}

TEST(Allocate, ZeroVarianceEntriesGetNothing) {
  const IntervalAllocation a = allocate(problem({0.0, 1.0}, 2.0));
  EXPECT_EQ(a.intervals[0].length(), 0.0);
  EXPECT_EQ(a.degenerate, 1u);
  EXPECT_NEAR(a.intervals[1].length(), 2.0, 1e-12);
}

TEST(Allocate, RejectsInvalid) {
  EXPECT_THROW(allocate(problem({1.0}, -1.0)), std::invalid_argument);
  EXPECT_THROW(allocate(problem({-1.0}, 1.0)), std::invalid_argument);
}

TEST(RealizedCoverage, Extremes) {
  const auto p = problem({1.0, 2.0}, 3.0);
  EXPECT_EQ(realized_coverage(allocate(p), p.center), 1.0);
  const std::vector<double> off{10.0, -10.0};
  EXPECT_EQ(realized_coverage(allocate(problem({1.0, 2.0}, 0.0)), off), 0.0);
  EXPECT_THROW(realized_coverage(allocate(p), std::vector<double>{1.0}), std::invalid_argument);
}

TEST(RealizedCoverage, MatrixLookup) {
  const auto p = problem({1.0, 1.0}, 4.0);
  const IntervalAllocation a = allocate(p);
  EXPECT_EQ(realized_coverage(a, DenseMatrix{{0.0, 1.5}}), 1.0);
  EXPECT_THROW(realized_coverage(a, DenseMatrix{{0.0}}), std::invalid_argument);
}
