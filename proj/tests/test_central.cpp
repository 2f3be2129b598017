#include <gtest/gtest.h>

#include <cmath>

#include "dpc/central.hpp"
#include "dpc/error.hpp"
#include "dpc/generator.hpp"
#include "dpc/mechanisms.hpp"
#include "helpers.hpp"

using namespace dpc;

namespace {

struct Planted {
  Dataset data;
  Point center;
};

Planted planted(std::uint64_t seed, std::size_t n = 10000, int d = 10, std::size_t t = 3000, double r = 0.02) {
  Rng rng(seed);
  const auto cfg = random_planted_config(GridSpec{d, 1025}, n, 1, t, r, rng);
  return {generate_planted(cfg, rng), cfg.clusters[0].center};
}

}  // namespace

TEST(RadiusGrid, Levels) {
  EXPECT_EQ(radius_levels(GridSpec{10, 1025}), 12);
  EXPECT_EQ(radius_levels(GridSpec{1, 2}), 0);
  EXPECT_EQ(radius_levels(GridSpec{1, 1025}), 10);
  EXPECT_EQ(max_probes(GridSpec{10, 1025}), 4u);
}

TEST(GoodCenter, CostIsSumOfPhases) {
  CentralSolverParams p;
  p.t = 3000;
  p.epsilon = 1.0;
  p.delta = 1e-6;
  const auto planted_set = planted(1);
  PrivacyBudget ledger;
  Rng rng(2);
  lsh_good_center(planted_set.data, 0.02, p, rng, ledger);
  const auto total = ledger.total();
  const auto predicted = good_center_cost(p, 10);
  EXPECT_NEAR(total.epsilon, predicted.epsilon, 1e-12);
  EXPECT_NEAR(total.delta, predicted.delta, 1e-18);
  EXPECT_LE(total.epsilon, p.epsilon * (1 + 1e-12));
  EXPECT_LE(total.delta, p.delta * (1 + 1e-12));
}

TEST(GoodCenter, RejectsTBelowFloor) {
  CentralSolverParams p;
  p.t = 100;
  const auto s = planted(3);
  PrivacyBudget ledger;
  Rng rng(1);
  EXPECT_THROW(lsh_good_center(s.data, 0.02, p, rng, ledger), PreconditionError);
}

TEST(GoodCenter, FindsPlantedClusterOften) {
  CentralSolverParams p;
  p.t = 3000;
  int near = 0;
  const int runs = 40;
  for (int seed = 0; seed < runs; ++seed) {
    const auto s = planted(100 + seed);
    PrivacyBudget ledger;
    Rng rng(seed);
    const auto res = lsh_good_center(s.data, 0.02, p, rng, ledger);
    if (!res.center) continue;
    const double radius = 2.0 * 0.02 * (res.design.c_effective + 1.0);
    near += count_in_ball(s.data, {*res.center, radius}) >= 3000 - 200;
  }
  // A single run succeeds with probability at least p_eff / 4 (about 0.1).
  EXPECT_GE(near, 4);
}

TEST(Solve1Cluster, LedgerMatchesPlan) {
  const auto s = planted(4);
  Rng rng(5);
  const auto sol = solve_1cluster(s.data, 3000, 1.0, 1e-6, 0.05, rng);
  const auto plan = solve_1cluster_cost(s.data.size(), s.data.grid(), 1.0, 1e-6, 0.05, {});
  EXPECT_DOUBLE_EQ(sol.budget_spent.total().epsilon, plan.total.epsilon);
  EXPECT_DOUBLE_EQ(sol.budget_spent.total().delta, plan.total.delta);
  EXPECT_NEAR(sol.coverage_slack, solve_1cluster_slack(s.data.grid(), 1.0, 0.05), 1e-12);
}

TEST(Solve1Cluster, RecoversPlantedBall) {
  int ok = 0;
  const int runs = 8;
  for (int seed = 0; seed < runs; ++seed) {
    const auto s = planted(200 + seed);
    Rng rng(seed);
    const auto sol = solve_1cluster(s.data, 3000, 1.0, 1e-6, 0.05, rng);
    const double oracle = oracle_min_ball(s.data, 3000).radius;
    const double c = sol.diagnostics.at("c_requested");
    const auto exact = count_in_ball(s.data, sol.ball);
    ok += !sol.fallback && sol.ball.radius <= 8.0 * (c + 1.0) * oracle &&
          static_cast<double>(exact) >= 3000.0 - sol.coverage_slack;
  }
  EXPECT_GE(ok, 6);
}

TEST(Solve1Cluster, RadiusIsOnTheGridOfLevels) {
  const auto s = planted(6);
  Rng rng(7);
  const auto sol = solve_1cluster(s.data, 3000, 1.0, 1e-6, 0.05, rng);
  ASSERT_GE(sol.radius_index, 0);
  const double c = sol.diagnostics.at("c_effective");
  EXPECT_NEAR(sol.ball.radius, 2.0 * (c + 1.0) * std::ldexp(1.0, sol.radius_index) / 1024.0, 1e-12);
  EXPECT_LE(sol.covered, s.data.size());
}

TEST(Solve1Cluster, Preconditions) {
  const auto s = planted(8, 2000, 3, 500, 0.05);
  Rng rng(1);
  try {
    solve_1cluster(s.data, 600, 1.0, 1e-6, 0.05, rng);
    FAIL() << "expected a floor violation";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("floor"), std::string::npos);
  }
  EXPECT_THROW(solve_1cluster(s.data, 2001, 1.0, 1e-6, 0.05, rng), PreconditionError);
  EXPECT_THROW(solve_1cluster(s.data, 1900, 1.0, 0.0, 0.05, rng), PreconditionError);
  EXPECT_THROW(solve_1cluster(s.data, 1900, -1.0, 1e-6, 0.05, rng), PreconditionError);
}

TEST(Solve1Cluster, DeterministicUnderSeed) {
  const auto s = planted(9);
  Rng a(3), b(3);
  const auto x = solve_1cluster(s.data, 3000, 1.0, 1e-6, 0.05, a);
  const auto y = solve_1cluster(s.data, 3000, 1.0, 1e-6, 0.05, b);
  EXPECT_EQ(x.ball.center, y.ball.center);
  EXPECT_EQ(x.ball.radius, y.ball.radius);
  EXPECT_EQ(x.noisy_count, y.noisy_count);
}
