#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "dpc/error.hpp"
#include "dpc/generator.hpp"
#include "dpc/ldp_cluster.hpp"
#include "dpc/local.hpp"
#include "dpc/verify_dp.hpp"
#include "helpers.hpp"

using namespace dpc;
using dpc::testing::three_se;

namespace {

Dataset constant_dataset(std::size_t n, const Point& v, std::int64_t side) {
  PointMatrix m(v.size(), static_cast<Eigen::Index>(n));
  m.colwise() = v;
  return Dataset(std::move(m), GridSpec{static_cast<int>(v.size()), side});
}

std::vector<std::size_t> iota_users(std::size_t n) {
  std::vector<std::size_t> u(n);
  std::iota(u.begin(), u.end(), std::size_t{0});
  return u;
}

LdpAvgConfig avg_config(std::size_t n, int d, double b, double eps, Rng& rng) {
  LdpAvgConfig c;
  c.b = b;
  c.box_origin = Point::Zero(d);
  c.epsilon = eps;
  c.assignment = random_coordinate_assignment(n, d, rng);
  return c;
}

const UserVector identity = [](const PointRef& x) { return std::optional<Point>(Point(x)); };

}  // namespace

// ---- oracle ----

TEST(LrOracle, RefusesInvocationsPastDeclaredEpsilon) {
  LrOracle o(constant_dataset(3, Point::Constant(1, 0.5), 3), 1.0);
  Rng rng(1);
  const Randomizer r = [](const PointRef&, Rng&) { return Message{}; };
  o.invoke(0, "a", 0.6, r, rng);
  o.invoke(0, "b", 0.4, r, rng);
  EXPECT_THROW(o.invoke(0, "c", 0.1, r, rng), BudgetExhausted);
  EXPECT_NO_THROW(o.invoke(1, "c", 1.0, r, rng));
  EXPECT_DOUBLE_EQ(o.user_epsilon(0), 1.0);
  EXPECT_TRUE(o.ledger_ok());
  EXPECT_THROW(o.invoke(9, "x", 0.1, r, rng), PreconditionError);
}

TEST(LrOracle, CountsRoundsPerUser) {
  LrOracle o(constant_dataset(2, Point::Constant(1, 0.5), 3), 10.0);
  Rng rng(1);
  const Randomizer r = [](const PointRef&, Rng&) { return Message{}; };
  o.invoke(0, "a", 1, r, rng);
  o.invoke(0, "b", 1, r, rng);
  o.begin_round();
  o.invoke(0, "c", 1, r, rng);
  o.begin_round();
  o.invoke(1, "d", 1, r, rng);
  EXPECT_EQ(o.max_rounds_per_user(), 2u);
  EXPECT_EQ(o.invocations(), 4u);
}

TEST(LrOracle, TranscriptHoldsOnlyMessages) {
  LrOracle o(constant_dataset(2, Point::Constant(1, 0.5), 3), 2.0, true);
  Rng rng(1);
  const Randomizer r = [](const PointRef& x, Rng& g) { return Message{Message::Kind::Real, 0, randomizer_R(x(0), 1.0, 1.0, g)}; };
  o.invoke(1, "avg/R", 1.0, r, rng);
  std::stringstream out;
  o.write_transcript(out);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["round"], 1);
  EXPECT_EQ(j["user"], 1);
  EXPECT_EQ(j["randomizer"], "avg/R");
  EXPECT_EQ(j["kind"], "real");
  EXPECT_TRUE(j["payload"].contains("z"));
  EXPECT_EQ(j["eps"], 1.0);
  EXPECT_EQ(j["user_eps_total"], 1.0);
}

// ---- randomized response counting ----

TEST(RandomizedResponse, AnalyticRatio) {
  for (double e : {0.1, 0.5, 1.0, 3.0}) {
    const double p = rr_keep_probability(e);
    EXPECT_NEAR(p / (1 - p), std::exp(e), 1e-12 * std::exp(e));
  }
}

TEST(LdpCount, ErrorBoundExample) {
  EXPECT_NEAR(ldp_count_error(10000, 1.0, 0.05), 675.8, 0.1);
  std::vector<std::uint8_t> bits(10000, 0);
  std::fill(bits.begin(), bits.begin() + 4000, 1);
  int within = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng rng(seed);
    within += std::abs(ldp_count(bits, 1.0, rng).value - 4000.0) <= 675.8;
  }
  EXPECT_GE(within, 380);
}

TEST(LdpCount, AllZerosLargeEpsilon) {
  std::vector<std::uint8_t> bits(5000, 0);
  Rng rng(3);
  const auto e = ldp_count(bits, 8.0, rng);
  EXPECT_TRUE(e.outside_bound_range);
  EXPECT_NEAR(e.value, 0.0, ldp_count_error(5000, 8.0, 0.01));
  EXPECT_FALSE(ldp_count(bits, 0.99, rng).outside_bound_range);
}

TEST(LdpCount, BernsteinBoundHoldsAboveOne) {
  std::vector<std::uint8_t> bits(20000, 0);
  std::fill(bits.begin(), bits.begin() + 7000, 1);
  for (double eps : {2.0, 4.0, 8.0}) {
    const double bound = ldp_count_error(bits.size(), eps, 0.05);
    int within = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      Rng rng(seed);
      within += std::abs(ldp_count(bits, eps, rng).value - 7000.0) <= bound;
    }
    EXPECT_GE(within, 285) << "eps=" << eps;
  }
}

TEST(LdpCount, Unbiased) {
  std::vector<std::uint8_t> bits(1000, 0);
  std::fill(bits.begin(), bits.begin() + 300, 1);
  double sum = 0.0, sq = 0.0;
  const int runs = 4000;
  Rng rng(4);
  for (int i = 0; i < runs; ++i) {
    const double v = ldp_count(bits, 1.0, rng).value;
    sum += v;
    sq += v * v;
  }
  const double mean = sum / runs, sd = std::sqrt(sq / runs - mean * mean);
  EXPECT_NEAR(mean, 300.0, 3.0 * sd / std::sqrt(runs));
}

TEST(LdpCount, ThroughOracleMatchesDirect) {
  const auto s = constant_dataset(500, Point::Constant(1, 1.0), 3);
  LrOracle o(s, 1.0);
  Rng a(5), b(5);
  const auto users = iota_users(500);
  const auto via = ldp_count(o, users, [](const PointRef& x) { return x(0) > 0.5; }, 1.0, "count", a);
  std::vector<std::uint8_t> bits(500, 1);
  EXPECT_DOUBLE_EQ(via.value, ldp_count(bits, 1.0, b).value);
  EXPECT_DOUBLE_EQ(o.max_user_epsilon(), 1.0);
}

// ---- frequency oracle ----

TEST(Hadamard, UniverseAndErrors) {
  EXPECT_EQ(hadamard_universe(1), 1u);
  EXPECT_EQ(hadamard_universe(5), 8u);
  EXPECT_EQ(hadamard_universe(1024), 1024u);
  Rng rng(1);
  EXPECT_THROW(hadamard_encode(3, 6, 1.0, rng), PreconditionError);
  EXPECT_THROW(hadamard_encode(8, 8, 1.0, rng), PreconditionError);
  std::vector<std::uint64_t> v{1, 2};
  EXPECT_THROW(ldp_histogram(v, (std::uint64_t{1} << 20) + 1, 1.0, 0.05, rng), PreconditionError);
}

TEST(Hadamard, FastTransformMatchesDirectEstimate) {
  Rng rng(2);
  HadamardAggregator agg(64, 1.0);
  for (int i = 0; i < 3000; ++i) agg.add(hadamard_encode(rng.index(64), 64, 1.0, rng));
  const auto all = agg.estimate_all();
  for (std::uint64_t v = 0; v < 64; ++v) EXPECT_NEAR(all[v], agg.estimate(v), 1e-8);
}

TEST(Hadamard, UnbiasedAndWithinBound) {
  const std::uint64_t u = 256;
  std::vector<std::uint64_t> values;
  for (int i = 0; i < 4000; ++i) values.push_back(static_cast<std::uint64_t>(i % 10 == 0 ? 7 : i % 200));
  std::vector<double> truth(u, 0.0);
  for (auto v : values) truth[v] += 1.0;
  int ok = 0;
  double bias = 0.0;
  const int runs = 100;
  for (int s = 0; s < runs; ++s) {
    Rng rng(100 + s);
    HadamardAggregator agg(u, 1.0);
    for (auto v : values) agg.add(hadamard_encode(v, u, 1.0, rng));
    const auto est = agg.estimate_all();
    double worst = 0.0;
    for (std::uint64_t v = 0; v < u; ++v) worst = std::max(worst, std::abs(est[v] - truth[v]));
    ok += worst <= agg.error_bound(0.05);
    bias += est[7] - truth[7];
  }
  EXPECT_GE(ok, 95);
  const double sd = 1.0 / std::tanh(0.5) * std::sqrt(4000.0);
  EXPECT_NEAR(bias / runs, 0.0, 3.0 * sd / std::sqrt(runs));
}

TEST(Hadamard, EncoderIsLocallyPrivate) {
  Rng rng(3);
  auto enc = [](std::uint64_t v) {
    return [v](Rng& r) {
      const auto m = hadamard_encode(v, 8, 1.0, r);
      return static_cast<std::size_t>(m.index * 2 + (m.value > 0));
    };
  };
  EXPECT_TRUE(empirical_dp_check("hr", enc(1), enc(6), 16, 1.0, 0.0, 100000, rng).pass);
}

TEST(LdpHistogram, FindsHeavyValue) {
  const std::size_t n = 10000;
  std::vector<std::uint64_t> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = i < 2000 ? 0 : i;
  const double tol = 10.0 * std::sqrt(n * std::log(n / 0.05));
  int found = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto hh = ldp_histogram(values, n, 1.0, 0.05, rng);
    EXPECT_LE(hh.size(), 100u);
    found += !hh.empty() && hh[0].value == 0 && std::abs(hh[0].estimate - 2000.0) <= tol;
  }
  EXPECT_GE(found, 27);
}

TEST(LdpHistogram, UniformSingletonsStayBelowBound) {
  const std::size_t n = 4096;
  std::vector<std::uint64_t> values(n);
  std::iota(values.begin(), values.end(), std::uint64_t{0});
  int clean = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    clean += ldp_histogram(values, n, 1.0, 0.05, rng).empty();
  }
  EXPECT_GE(clean, 18);
}

TEST(LdpHistogram, SingleElement) {
  std::vector<std::uint64_t> values(5000, 3);
  Rng rng(4);
  const auto hh = ldp_histogram(values, 16, 1.0, 0.05, rng);
  ASSERT_EQ(hh.size(), 1u);
  EXPECT_EQ(hh[0].value, 3u);
  EXPECT_NEAR(hh[0].estimate, 5000.0, 500.0);
}

// ---- averaging ----

TEST(RandomizerR, OutOfRangeBecomesZero) {
  Rng rng(5);
  double sum = 0.0, abs_sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = randomizer_R(1.5, 1.0, 1.0, rng);
    sum += z;
    abs_sum += std::abs(z);
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(abs_sum / n, 1.0, 0.01);  // E|Lap(1)| = 1
}

TEST(RandomizerR, LargeEpsilonIsNearlyExact) {
  Rng rng(6);
  EXPECT_NEAR(randomizer_R(0.5, 1e6, 1.0, rng), 0.5, 1e-4);
}

TEST(RandomizerR, EmpiricalRatio) {
  Rng rng(7);
  auto r = [](double x) { return [x](Rng& g) { return bin_real(randomizer_R(x, 1.0, 0.2, g), -0.2, 0.1, 8); }; };
  EXPECT_TRUE(empirical_dp_check("R", r(0.0), r(0.2), 8, 1.0, 0.0, 100000, rng).pass);
}

TEST(LdpAvg, IdenticalUsersWithinBound) {
  const std::size_t n = 100000;
  const int d = 5;
  Point v(d);
  v << 0.05, 0.02, 0.08, 0.01, 0.06;
  int ok = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    Rng rng(s);
    LrOracle o(constant_dataset(n, Point::Zero(d), 2), 1.0);
    const auto users = iota_users(n);
    const auto cfg = avg_config(n, d, 0.1, 1.0, rng);
    const UserVector fixed = [&](const PointRef&) { return std::optional<Point>(v); };
    const auto res = ldp_avg(o, users, fixed, cfg, rng);
    ASSERT_TRUE(res.value);
    const auto t = static_cast<std::size_t>(std::max(1.0, res.count_estimate));
    ok += (*res.value - v).norm() <= ldp_avg_error_bound(n, t, d, 0.1, 1.0, 0.05);
    for (auto g : res.group_sizes) EXPECT_TRUE(g >= n / (2 * d) && g <= 2 * n / d);
    EXPECT_LE(o.max_user_epsilon(), 1.0 + 1e-12);
  }
  EXPECT_GE(ok, 18);
}

TEST(LdpAvg, EmptyBoxIsLowCount) {
  const std::size_t n = 20000;
  Rng rng(8);
  LrOracle o(constant_dataset(n, Point::Constant(2, 1.0), 2), 1.0);
  const auto users = iota_users(n);
  auto cfg = avg_config(n, 2, 0.1, 1.0, rng);
  const auto res = ldp_avg(o, users, identity, cfg, rng);
  EXPECT_FALSE(res.value.has_value());
}

TEST(LdpAvg, TwoPointMixture) {
  const std::size_t n = 100000;
  PointMatrix m(2, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) m.col(static_cast<Eigen::Index>(j)) << (j % 2 ? 0.0625 : 0.03125), 0.0625;
  const Dataset s(m, GridSpec{2, 33});
  const Point mean(Eigen::Vector2d(0.046875, 0.0625));
  int ok = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    LrOracle o(s, 1.0);
    const auto users = iota_users(n);
    const auto cfg = avg_config(n, 2, 0.1, 1.0, rng);
    const auto res = ldp_avg(o, users, identity, cfg, rng);
    ASSERT_TRUE(res.value);
    ok += (*res.value - mean).norm() <= ldp_avg_error_bound(n, n, 2, 0.1, 1.0, 0.05);
  }
  EXPECT_GE(ok, 9);
}

TEST(LdpAvg, UnbiasedOverSeeds) {
  const std::size_t n = 2000;
  const int d = 2;
  Point v(d);
  v << 0.05, 0.03;
  Point sum = Point::Zero(d), sq = Point::Zero(d);
  const int runs = 10000;
  Rng rng(9);
  const auto users = iota_users(n);
  const UserVector fixed = [&](const PointRef&) { return std::optional<Point>(v); };
  for (int s = 0; s < runs; ++s) {
    LrOracle o(constant_dataset(n, Point::Zero(d), 2), 1.0);
    const auto cfg = avg_config(n, d, 0.1, 1.0, rng);
    const auto res = ldp_avg(o, users, fixed, cfg, rng);
    ASSERT_TRUE(res.value);
    sum += *res.value;
    sq += res.value->cwiseAbs2();
  }
  const Point mean = sum / runs;
  for (int i = 0; i < d; ++i) {
    const double se = std::sqrt((sq(i) / runs - mean(i) * mean(i)) / runs);
    EXPECT_NEAR(mean(i), v(i), 3.0 * se) << "coordinate " << i;
  }
}

TEST(LdpAvg, CompressionStaysWithinBudget) {
  const std::size_t n = 50000;
  const int d = 3;
  Point v = Point::Constant(d, 0.04);
  Rng rng(10);
  const UserVector fixed = [&](const PointRef&) { return std::optional<Point>(v); };
  const auto enc = avg_encoding(n, 0.1, 1.0, 0.05);
  EXPECT_LE(enc.bits, static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) + 8);
  const double per_coord = 0.1 / (n * 1.0) * std::sqrt(n * std::log(d / 0.05));
  int ok = 0;
  for (int s = 0; s < 10; ++s) {
    Rng a(s), b(s);
    LrOracle o1(constant_dataset(n, Point::Zero(d), 2), 1.0), o2(constant_dataset(n, Point::Zero(d), 2), 1.0);
    auto cfg = avg_config(n, d, 0.1, 1.0, rng);
    const auto plain = ldp_avg(o1, iota_users(n), fixed, cfg, a);
    cfg.compress = true;
    const auto packed = ldp_avg(o2, iota_users(n), fixed, cfg, b);
    ASSERT_TRUE(plain.value && packed.value);
    ok += (*plain.value - *packed.value).cwiseAbs().maxCoeff() <= 10.0 * per_coord;
  }
  EXPECT_GE(ok, 9);
}

// ---- exclusion hash ----

TEST(MemberHash, RateMatchesProbability) {
  Rng rng(11);
  const auto h = MemberHash::sample(6, 0.3, rng);
  EXPECT_NEAR(h.probability(), 0.3, 1e-9);
  EXPECT_EQ(h.independence(), 6);
  const std::size_t n = 100000;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) hits += (h.value(k) >> 31) < static_cast<std::uint64_t>(0.3 * (1u << 30));
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.3, three_se(0.3, n));
  EXPECT_THROW(MemberHash::sample(0, 0.5, rng), PreconditionError);
  EXPECT_THROW(MemberHash::sample(3, 1.5, rng), PreconditionError);
}

TEST(MemberHash, PairwiseJointProbability) {
  Rng rng(12);
  const Point x = Eigen::Vector2d(0.25, 0.5), y = Eigen::Vector2d(0.75, 0.5);
  const std::size_t n = 40000;
  std::size_t both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = MemberHash::sample(4, 0.5, rng);
    both += h(x) && h(y);
  }
  EXPECT_NEAR(static_cast<double>(both) / n, 0.25, three_se(0.25, n));
}

TEST(MemberHash, LambdaWiseTailBound) {
  const int lambda = 6;
  const std::size_t m = 1000;
  const double p = 0.4, alpha = 150.0;
  const double bound = std::pow(m * lambda / (alpha * alpha), lambda / 2.0);
  Rng rng(13);
  const int runs = 3000;
  int over = 0;
  for (int r = 0; r < runs; ++r) {
    const auto h = MemberHash::sample(lambda, p, rng);
    std::size_t x = 0;
    for (std::size_t k = 0; k < m; ++k) x += (h.value(k * 7919 + 11) >> 31) < static_cast<std::uint64_t>(p * (1u << 30));
    over += std::abs(static_cast<double>(x) - p * m) >= alpha;
  }
  EXPECT_LE(static_cast<double>(over) / runs, bound + three_se(bound, runs));
}

TEST(MemberHash, ZeroSignFolded) {
  Point a = Eigen::Vector2d(0.0, 0.5), b = Eigen::Vector2d(-0.0, 0.5);
  EXPECT_EQ(MemberHash::point_key(a), MemberHash::point_key(b));
}

TEST(Exclusion, BallAndHash) {
  Rng rng(14);
  ExclusionPredicate sigma;
  const Point in = Eigen::Vector2d(0.5, 0.5), out = Eigen::Vector2d(0.9, 0.9);
  EXPECT_FALSE(sigma(in));
  sigma.append({in, 0.1, MemberHash::sample(3, 1.0, rng)});
  EXPECT_TRUE(sigma(in));
  EXPECT_FALSE(sigma(out));
  sigma.append({out, 0.1, MemberHash::sample(3, 0.0, rng)});
  EXPECT_FALSE(sigma(out));
  EXPECT_TRUE(sigma(in));
}

// ---- 1-cluster plan ----

TEST(Plan, PartitionsAreExact) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 5000 + rng.index(5000);
    const auto users = iota_users(n);
    LdpClusterOptions opt;
    opt.repetitions = 1 + rng.index(3);
    opt.list_cap = 1 + rng.index(4);
    const auto plan = Ldp1ClusterPlan::build(users, GridSpec{3, 65}, n / 2, 0.05, opt, rng);
    ASSERT_EQ(plan.pair_group.size(), n);
    for (const auto& members : {plan.pair_members(), plan.triple_members()}) {
      std::vector<int> seen(n, 0);
      std::size_t lo = n, hi = 0;
      for (const auto& g : members) {
        lo = std::min(lo, g.size());
        hi = std::max(hi, g.size());
        for (auto u : g) ++seen[u];
      }
      EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      EXPECT_LE(hi - lo, 1u);
    }
    EXPECT_EQ(plan.pair_members().size(), plan.pair_count());
    EXPECT_EQ(plan.triple_members().size(), plan.triple_count());
    EXPECT_EQ(plan.levels, radius_levels(GridSpec{3, 65}));
  }
}

TEST(Plan, DefaultSizes) {
  Rng rng(1);
  const std::size_t n = 1u << 20;
  const auto users = iota_users(n);
  LdpClusterOptions opt;
  EXPECT_THROW(Ldp1ClusterPlan::build(users, GridSpec{2, 5}, n / 64, 0.05, opt, rng), PreconditionError);
  opt.list_cap = 1;
  const auto plan = Ldp1ClusterPlan::build(users, GridSpec{2, 5}, n / 2, 0.05, opt, rng);
  EXPECT_EQ(plan.repetitions,
            static_cast<std::size_t>(std::ceil(4.0 * std::pow(static_cast<double>(n), 0.2) * std::log(20.0))));
}

TEST(Plan, RandomPartitionSizes) {
  Rng rng(2);
  const auto labels = random_partition(103, 10, rng);
  std::vector<int> counts(10, 0);
  for (auto l : labels) ++counts[l];
  for (int c : counts) EXPECT_TRUE(c == 10 || c == 11);
  EXPECT_THROW(random_partition(5, 0, rng), PreconditionError);
}

// ---- local 1-cluster ----

TEST(Ldp1Cluster, IdenticalUsersPickSmallestRadius) {
  const std::size_t n = 40000;
  const Point v = Eigen::Vector2d(0.25, 0.75);
  int smallest = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    LrOracle o(constant_dataset(n, v, 65), 16.0);
    LdpClusterOptions opt;
    opt.repetitions = 1;
    opt.list_cap = 1;
    const auto users = iota_users(n);
    const auto sol = ldp_1cluster(o, users, n, 16.0, 0.05, {}, rng, opt);
    smallest += sol.radius_index == 0;
    EXPECT_LE(o.max_rounds_per_user(), 3u);
    EXPECT_LE(o.max_user_epsilon(), 16.0 * (1 + 1e-12));
  }
  EXPECT_GE(smallest, 18);
}

TEST(Ldp1Cluster, PlantedClusterRecovered) {
  const std::size_t n = 40000, t = 20000;
  int ok = 0;
  const int runs = 10;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng(seed);
    const auto cfg = random_planted_config(GridSpec{3, 1025}, n, 1, t, 0.01, rng);
    const auto s = generate_planted(cfg, rng);
    LrOracle o(s, 16.0);
    LdpClusterOptions opt;
    opt.repetitions = 1;
    opt.list_cap = 1;
    const auto sol = ldp_1cluster(o, iota_users(n), t, 16.0, 0.05, {}, rng, opt);
    const double oracle = oracle_min_ball(s, t).radius;
    const double c = sol.diagnostics.at("c_effective");
    ok += !sol.fallback && sol.ball.radius <= 10.0 * c * oracle &&
          static_cast<double>(count_in_ball(s, sol.ball)) >= static_cast<double>(t) - sol.coverage_slack;
    EXPECT_LE(o.max_rounds_per_user(), 3u);
    EXPECT_TRUE(o.ledger_ok());
  }
  EXPECT_GE(ok, 6);
}

TEST(LdpGoodCenter, ExcludedClusterYieldsNoNearbyCandidate) {
  const std::size_t n = 40000, t = 20000;
  int clean = 0;
  const int runs = 10;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng(seed);
    const auto cfg = random_planted_config(GridSpec{3, 1025}, n, 1, t, 0.01, rng);
    const auto s = generate_planted(cfg, rng);
    ExclusionPredicate sigma;
    sigma.append({cfg.clusters[0].center, 0.01 + 1e-9, MemberHash::sample(3, 1.0, rng)});
    LrOracle o(s, 16.0);
    LshParams lsh;
    const auto cands = ldp_good_center(o, iota_users(n), 0.01, t / 2, 16.0, 0.05, sigma, lsh, 4, rng);
    const double c = design_lsh([&] {
                       LshParams p = lsh;
                       p.r = 0.01;
                       p.n = n;
                       return p;
                     }()).c_effective;
    bool near = false;
    for (const auto& cand : cands) near = near || (cand.center - cfg.clusters[0].center).norm() <= 3.0 * c * 0.01;
    clean += !near;
  }
  EXPECT_GE(clean, 9);
}
