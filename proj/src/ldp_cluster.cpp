#include "dpc/ldp_cluster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace dpc {

namespace {

std::uint64_t bucket_universe_for(std::size_t users) {
  const auto u = std::bit_ceil(std::max<std::uint64_t>(4 * static_cast<std::uint64_t>(users), 64));
  return std::min<std::uint64_t>(u, HadamardAggregator::kMaxEnumerable);
}

LshFunction session_hash(const LdpGoodCenterParams& p, int dim, std::uint64_t universe, Rng& rng) {
  // The top value of the universe is reserved for excluded users.
  return sample_lsh(p.design, p.r, dim, universe - 1, rng);
}

}  // namespace

std::vector<std::size_t> random_partition(std::size_t count, std::size_t groups, Rng& rng) {
  if (groups == 0) throw PreconditionError("random_partition: need at least one group");
  std::vector<std::size_t> label(count);
  for (std::size_t i = 0; i < count; ++i) label[i] = i % groups;
  for (std::size_t i = count; i > 1; --i) std::swap(label[i - 1], label[rng.index(i)]);
  return label;
}

namespace {

std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& users,
                                                 const std::vector<std::size_t>& label, std::size_t groups) {
  std::vector<std::vector<std::size_t>> out(groups);
  for (std::size_t i = 0; i < users.size(); ++i) out[label[i]].push_back(users[i]);
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> Ldp1ClusterPlan::pair_members() const {
  return members_of(users, pair_group, pair_count());
}

std::vector<std::vector<std::size_t>> Ldp1ClusterPlan::triple_members() const {
  return members_of(users, triple_group, triple_count());
}

Ldp1ClusterPlan Ldp1ClusterPlan::build(std::span<const std::size_t> users, const GridSpec& grid, std::size_t t,
                                       double beta, const LdpClusterOptions& options, Rng& rng) {
  const std::size_t n = users.size();
  if (n == 0) throw PreconditionError("ldp plan: no users");
  if (t == 0 || t > n) throw PreconditionError("ldp plan: t must lie in [1, n]");
  const double nd = static_cast<double>(n);
  Ldp1ClusterPlan plan;
  plan.levels = radius_levels(grid);
  plan.repetitions = options.repetitions
                         ? options.repetitions
                         : static_cast<std::size_t>(std::ceil(4.0 * std::pow(nd, options.lsh.a) * std::log(1.0 / beta)));
  plan.list_cap = options.list_cap ? options.list_cap
                                   : static_cast<std::size_t>(std::ceil(64.0 * std::pow(nd, 1.0 + options.lsh.b) /
                                                                        static_cast<double>(t)));
  if (plan.triple_count() > n)
    throw PreconditionError("ldp plan: J*K*L = " + std::to_string(plan.triple_count()) + " groups exceed n = " +
                            std::to_string(n) + "; lower the repetitions or the list cap");
  plan.users.assign(users.begin(), users.end());
  plan.pair_group = random_partition(n, plan.pair_count(), rng);
  plan.triple_group = random_partition(n, plan.triple_count(), rng);
  return plan;
}

// ---- good center --------------------------------------------------------------------

LdpGoodCenterSession::LdpGoodCenterSession(std::vector<std::size_t> users, int dim,
                                           const LdpGoodCenterParams& params, const ExclusionPredicate& sigma,
                                           std::string label, Rng& rng)
    : users_(std::move(users)),
      d_(dim),
      params_(params),
      sigma_(sigma),
      label_(std::move(label)),
      bucket_universe_(bucket_universe_for(users_.size())),
      h_(session_hash(params_, dim, bucket_universe_, rng)) {
  if (users_.empty()) throw PreconditionError("ldp good center: no users");
  if (!(params.epsilon > 0.0) || !(params.r > 0.0)) throw PreconditionError("ldp good center: bad epsilon or r");
  z_ = sample_rotation(d_, rng).basis;
  const double c = params_.design.c_effective;
  p_len_ = 2.0 * params_.r * c *
           std::sqrt(std::log(d_ * static_cast<double>(users_.size()) / params_.beta) / d_);
  const double reach = std::sqrt(static_cast<double>(d_));
  jlo_ = static_cast<std::int64_t>(std::floor(-reach / p_len_));
  slots_ = static_cast<std::size_t>(static_cast<std::int64_t>(std::floor(reach / p_len_)) - jlo_ + 1);
}

void LdpGoodCenterSession::round_one(LrOracle& oracle, Rng& rng) {
  const double eq = params_.epsilon / 4.0;
  const std::uint64_t ub = bucket_universe_;
  const std::uint64_t excluded_bucket = ub - 1;
  const std::uint64_t pair_universe = hadamard_universe((slots_ + 1) * ub);

  // Bucket frequencies.
  HadamardAggregator buckets(ub, eq);
  const Randomizer bucket_report = [&](const PointRef& x, Rng& g) {
    return hadamard_encode(sigma_(x) ? excluded_bucket : h_.bucket(x), ub, eq, g);
  };
  // (interval, bucket) frequencies, one axis per user group.
  const auto axis_of = random_partition(users_.size(), static_cast<std::size_t>(d_), rng);
  std::vector<HadamardAggregator> pairs(static_cast<std::size_t>(d_), HadamardAggregator(pair_universe, eq));

  const std::string bl = label_ + "/buckets", il = label_ + "/intervals";
  for (std::size_t j = 0; j < users_.size(); ++j) {
    buckets.add(oracle.invoke(users_[j], bl, eq, bucket_report, rng));
    const int axis = static_cast<int>(axis_of[j]);
    const Randomizer interval_report = [&](const PointRef& x, Rng& g) {
      std::uint64_t v;
      if (sigma_(x)) {
        v = static_cast<std::uint64_t>(slots_) * ub;
      } else {
        const double y = z_.col(axis).dot(x);
        auto k = static_cast<std::int64_t>(std::floor(y / p_len_)) - jlo_;
        k = std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(slots_) - 1);
        v = static_cast<std::uint64_t>(k) * ub + h_.bucket(x);
      }
      return hadamard_encode(v, pair_universe, eq, g);
    };
    pairs[axis_of[j]].add(oracle.invoke(users_[j], il, eq, interval_report, rng));
  }

  const auto est = buckets.estimate_all();
  const double err = buckets.error_bound(params_.beta);
  list_threshold_ = static_cast<double>(params_.t) / 16.0 * params_.design.p_side - err;
  for (std::uint64_t u = 0; u + 1 < ub; ++u)
    if (est[u] >= list_threshold_) heavy_.push_back({u, est[u]});
  std::stable_sort(heavy_.begin(), heavy_.end(), [](const auto& a, const auto& b) { return a.estimate > b.estimate; });
  if (heavy_.size() > params_.list_cap) heavy_.resize(params_.list_cap);

  // Per-axis argmax interval, widened by one interval each side.
  for (const auto& hh : heavy_) {
    Point lo(d_);
    for (int i = 0; i < d_; ++i) {
      std::size_t pick = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < slots_; ++k) {
        const double a = pairs[static_cast<std::size_t>(i)].estimate(static_cast<std::uint64_t>(k) * ub + hh.value);
        if (a > best) {
          best = a;
          pick = k;
        }
      }
      lo(i) = static_cast<double>(jlo_ + static_cast<std::int64_t>(pick) - 1) * p_len_;
    }
    box_lo_.push_back(std::move(lo));
  }
}

void LdpGoodCenterSession::round_two(LrOracle& oracle, Rng& rng) {
  if (heavy_.empty()) return;
  // One averaging group per heavy bucket.
  const auto group_of = random_partition(users_.size(), heavy_.size(), rng);
  std::vector<std::vector<std::size_t>> groups(heavy_.size());
  for (std::size_t j = 0; j < users_.size(); ++j) groups[group_of[j]].push_back(users_[j]);

  for (std::size_t g = 0; g < heavy_.size(); ++g) {
    const std::uint64_t u = heavy_[g].value;
    LdpAvgConfig cfg;
    cfg.b = 3.0 * p_len_;
    cfg.box_origin = box_lo_[g];
    cfg.epsilon = params_.epsilon / 4.0;
    cfg.beta = params_.beta;
    cfg.compress = params_.compress;
    cfg.assignment = random_coordinate_assignment(groups[g].size(), d_, rng);
    const UserVector rotated = [&](const PointRef& x) -> std::optional<Point> {
      if (sigma_(x) || h_.bucket(x) != u) return std::nullopt;
      return Point(z_.transpose() * x);
    };
    const auto avg = ldp_avg(oracle, groups[g], rotated, cfg, rng, label_ + "/average");
    // Clip to the unit cube.
    if (avg.value) candidates_.push_back({Point((z_ * *avg.value).cwiseMax(0.0).cwiseMin(1.0)), u});
  }
}

std::vector<CandidateCenter> ldp_good_center(LrOracle& oracle, std::span<const std::size_t> users, double r,
                                             std::size_t t, double epsilon, double beta,
                                             const ExclusionPredicate& sigma, const LshParams& lsh,
                                             std::size_t list_cap, Rng& rng, bool compress) {
  LshParams lp = lsh;
  lp.r = r;
  lp.n = users.size();
  LdpGoodCenterParams gp;
  gp.r = r;
  gp.t = t;
  gp.epsilon = epsilon;
  gp.beta = beta;
  gp.list_cap = list_cap;
  gp.compress = compress;
  gp.design = design_lsh(lp);
  LdpGoodCenterSession session({users.begin(), users.end()}, oracle.dim(), gp, sigma, "good-center", rng);
  session.round_one(oracle, rng);
  oracle.begin_round();
  session.round_two(oracle, rng);
  return session.candidates();
}

// ---- 1-cluster ----------------------------------------------------------------------

double ldp_selection_slack(std::size_t n, std::size_t groups, double epsilon, double beta) {
  const double g = static_cast<double>(groups);
  const double sampling = std::sqrt(static_cast<double>(n) * g * std::log(4.0 * g / beta) / 2.0);
  const std::size_t size = std::max<std::size_t>(n / std::max<std::size_t>(groups, 1), 1);
  return sampling + g * ldp_count_error(size, epsilon, beta / (2.0 * g));
}

Solution ldp_1cluster(LrOracle& oracle, std::span<const std::size_t> users, std::size_t t, double epsilon,
                      double beta, const ExclusionPredicate& sigma, Rng& rng, const LdpClusterOptions& options) {
  if (!(epsilon > 0.0)) throw PreconditionError("ldp_1cluster: epsilon must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("ldp_1cluster: beta must lie in (0, 1)");
  const GridSpec& grid = oracle.grid();
  const int d = grid.dimension;
  const std::size_t n = users.size();
  const auto plan = Ldp1ClusterPlan::build(users, grid, t, beta, options, rng);
  const int J = plan.levels;
  const std::size_t K = plan.repetitions, L = plan.list_cap;
  const std::size_t JK = plan.pair_count(), G = plan.triple_count();
  const auto pair_users = plan.pair_members();

  LshParams lp = options.lsh;
  lp.r = 1.0;
  lp.n = std::max<std::size_t>(n / JK, 2);
  const LshDesign design = design_lsh(lp);
  const double c = design.c_effective;

  Solution sol;
  sol.budget_spent.charge("good-center/buckets", epsilon / 8.0, 0.0);
  sol.budget_spent.charge("good-center/intervals", epsilon / 8.0, 0.0);
  sol.budget_spent.charge("good-center/average", epsilon / 8.0, 0.0);
  sol.budget_spent.charge("counts", epsilon / 2.0, 0.0);

  // Rounds one and two: J*K good-center sessions side by side.
  std::vector<LdpGoodCenterSession> sessions;
  sessions.reserve(JK);
  const std::size_t t_pair = std::max<std::size_t>(t / (2 * JK), 1);
  for (int j = 0; j < J; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      LdpGoodCenterParams gp;
      gp.r = ldp_radius(grid, j);
      gp.t = t_pair;
      gp.epsilon = epsilon / 2.0;
      gp.beta = beta;
      gp.list_cap = L;
      gp.compress = options.compress;
      gp.design = design;
      sessions.emplace_back(pair_users[static_cast<std::size_t>(j) * K + k], d, gp, sigma,
                            "1cluster/j=" + std::to_string(j), rng);
    }
  for (auto& s : sessions) s.round_one(oracle, rng);
  oracle.begin_round();
  for (auto& s : sessions) s.round_two(oracle, rng);
  oracle.begin_round();

  // Round three: one count per (j, k, l) group.
  const auto triple_users = plan.triple_members();
  std::vector<double> scaled(G, -std::numeric_limits<double>::infinity());
  std::vector<const CandidateCenter*> cand(G, nullptr);
  for (int j = 0; j < J; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      const auto& cs = sessions[static_cast<std::size_t>(j) * K + k].candidates();
      const double radius = 5.0 * c * ldp_radius(grid, j);
      for (std::size_t l = 0; l < L && l < cs.size(); ++l) {
        const std::size_t g = (static_cast<std::size_t>(j) * K + k) * L + l;
        const Point& y = cs[l].center;
        const auto est = ldp_count(
            oracle, triple_users[g], [&](const PointRef& x) { return !sigma(x) && (x - y).norm() <= radius; },
            epsilon / 2.0, "1cluster/count", rng);
        scaled[g] = static_cast<double>(G) * est.value;
        cand[g] = &cs[l];
      }
    }

  const double slack = ldp_selection_slack(n, G, epsilon / 2.0, beta);
  const double threshold = static_cast<double>(t) - slack;
  auto& dg = sol.diagnostics;
  dg["c_requested"] = design.c_requested;
  dg["c_effective"] = c;
  dg["p_eff"] = design.p_side;
  dg["q_eff"] = design.q_side;
  dg["lsh_concat"] = design.concat;
  dg["lsh_width_ratio"] = design.width_ratio;
  dg["radius_levels"] = J;
  dg["repetitions"] = static_cast<double>(K);
  dg["list_cap"] = static_cast<double>(L);
  dg["groups"] = static_cast<double>(G);
  dg["good_center_t"] = static_cast<double>(t_pair);
  dg["selection_slack"] = slack;
  dg["selection_threshold"] = threshold;
  const double nd = static_cast<double>(n);
  dg["listing_selection_slack"] =
      224.0 / epsilon * std::pow(nd, 1.0 + options.lsh.a) / std::sqrt(static_cast<double>(t)) *
      std::sqrt(std::log(d * static_cast<double>(grid.side)) * std::log(1.0 / beta) * std::log(32.0 * nd / beta));
  std::size_t found = 0;
  for (const auto& s : sessions) found += s.candidates().size();
  dg["candidates"] = static_cast<double>(found);

  for (int j = 0; j < J; ++j) {
    std::size_t best = G;
    for (std::size_t g = static_cast<std::size_t>(j) * K * L; g < static_cast<std::size_t>(j + 1) * K * L; ++g)
      if (cand[g] && scaled[g] >= threshold && (best == G || scaled[g] > scaled[best])) best = g;
    if (best == G) continue;
    sol.ball = {cand[best]->center, 5.0 * c * ldp_radius(grid, j)};
    sol.noisy_count = scaled[best];
    sol.covered = static_cast<std::size_t>(std::clamp(std::round(scaled[best]), 0.0, nd));
    sol.coverage_slack = 2.0 * slack;
    sol.radius_index = j;
    return sol;
  }

  sol.fallback = true;
  sol.diagnostic = "no (radius, repetition, candidate) group cleared the selection threshold";
  sol.ball = {Point::Constant(d, 0.5), std::sqrt(static_cast<double>(d)) / 2.0};
  sol.covered = n;
  sol.noisy_count = nd;
  sol.coverage_slack = 0.0;
  return sol;
}

}  // namespace dpc
