#include "dpc/central.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dpc/mechanisms.hpp"

namespace dpc {

namespace {

// Per-axis interval selection: eps/4 shared by d report-noisy-max calls. The
// split is whichever of basic (eps/4d each) or advanced composition at the
// per-axis budget eps/(10 sqrt(d ln(8/delta))) allows more noise-free signal.
struct AxisPlan {
  double eps_per_axis;
  EpsDelta cost;
};

AxisPlan axis_plan(double epsilon, double delta, int d) {
  const double quarter = epsilon / 4.0;
  const AxisPlan basic{quarter / d, {quarter, 0.0}};
  const double per_axis = epsilon / (10.0 * std::sqrt(d * std::log(8.0 / delta)));
  const EpsDelta adv = compose_advanced(static_cast<std::size_t>(d), per_axis, 0.0, delta / 8.0);
  if (adv.epsilon <= quarter && per_axis > basic.eps_per_axis) return {per_axis, adv};
  return basic;
}

void check_common(const CentralSolverParams& p) {
  if (!(p.epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw PreconditionError("delta must lie in (0, 1)");
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw PreconditionError("beta must lie in (0, 1)");
  if (p.t < 1) throw PreconditionError("t must be positive");
}

std::size_t effective_n(std::size_t public_n, const Dataset& s) { return public_n ? public_n : s.size(); }

}  // namespace

std::size_t CentralSolverParams::resolved_repetitions(std::size_t n) const {
  if (repetitions) return repetitions;
  return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), lsh.a) * std::log(3.0 / beta)));
}

EpsDelta good_center_cost(const CentralSolverParams& params, int d) {
  check_common(params);
  const double q = params.epsilon / 4.0;
  const std::vector<EpsDelta> parts{
      {q, params.delta / 4.0}, axis_plan(params.epsilon, params.delta, d).cost, {q, params.delta / 4.0}, {q, 0.0}};
  return compose_basic(parts);
}

double good_center_floor(const CentralSolverParams& params, std::size_t n) {
  return stable_histogram_floor(n, params.epsilon / 4.0, params.delta / 4.0, params.beta);
}

GoodCenterResult lsh_good_center(const Dataset& s, double r, const CentralSolverParams& params, Rng& rng,
                                 PrivacyBudget& budget) {
  check_common(params);
  if (!(r > 0.0)) throw PreconditionError("lsh_good_center: r must be positive");
  const std::size_t n = effective_n(params.public_n, s);
  const int d = s.dim();
  const double eps = params.epsilon, delta = params.delta, beta = params.beta;
  const double eq = eps / 4.0;

  GoodCenterResult res;
  LshParams lp = params.lsh;
  lp.r = r;
  lp.n = n;
  res.design = design_lsh(lp);
  const double c = res.design.c_effective;
  res.histogram_threshold = good_center_floor(params, n);
  if (static_cast<double>(params.t) < res.histogram_threshold)
    throw PreconditionError("lsh_good_center: t=" + std::to_string(params.t) +
                            " is below the bucket-histogram floor " + std::to_string(res.histogram_threshold));

  const AxisPlan axes = axis_plan(eps, delta, d);
  budget.charge("good-center/bucket-histogram", eq, delta / 4.0);
  budget.charge("good-center/axis-intervals", axes.cost);
  budget.charge("good-center/noisy-average", eq, delta / 4.0);
  budget.charge("good-center/above-threshold", eq, 0.0);

  // Hash, then keep the stably heavy buckets.
  const LshFunction h = sample_lsh(res.design, r, d, default_universe(n), rng);
  const std::vector<std::uint64_t> ids = h.buckets(s.points());
  std::map<std::uint64_t, std::vector<std::size_t>> members;
  for (std::size_t j = 0; j < ids.size(); ++j) members[ids[j]].push_back(j);
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto& [u, m] : members) counts[u] = m.size();
  const auto heavy = stable_histogram(counts, n, res.histogram_threshold, eq, delta / 4.0, beta, rng);
  res.heavy_buckets = heavy.size();

  // Random basis and axis intervals.
  const Eigen::MatrixXd z = sample_rotation(d, rng).basis;
  const double p = 2.0 * r * c * std::sqrt(std::log(d * static_cast<double>(n) / beta) / d);
  res.interval_length = p;
  const double reach = std::sqrt(static_cast<double>(d));
  const auto jlo = static_cast<std::int64_t>(std::floor(-reach / p));
  const auto jhi = static_cast<std::int64_t>(std::floor(reach / p));
  const auto slots = static_cast<std::size_t>(jhi - jlo + 1);

  const double eps_avg = std::min(eq / 2.0, 0.999);
  const double sigma_count = gaussian_sigma(1.0, eps_avg, delta / 8.0);
  const double sigma_sum = gaussian_sigma(3.0 * p * reach, eps_avg, delta / 8.0);

  for (const auto& rel : heavy) {
    const auto& idx = members.at(rel.bin);
    Eigen::MatrixXd y(d, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) y.col(static_cast<Eigen::Index>(j)) = z.transpose() * s.point(idx[j]);

    // One noisy interval per axis, widened by p on each side.
    Point lo(d);
    for (int i = 0; i < d; ++i) {
      std::vector<double> hist(slots, 0.0);
      for (Eigen::Index j = 0; j < y.cols(); ++j) {
        auto k = static_cast<std::int64_t>(std::floor(y(i, j) / p)) - jlo;
        k = std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(slots) - 1);
        hist[static_cast<std::size_t>(k)] += 1.0;
      }
      const std::size_t pick = report_noisy_max(hist, axes.eps_per_axis, rng);
      lo(i) = static_cast<double>(jlo + static_cast<std::int64_t>(pick) - 1) * p;
    }
    const Point mid = lo.array() + 1.5 * p;

    // Noisy average of the bucket points inside the box.
    Point sum = Point::Zero(d);
    double inside = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const auto col = y.col(j);
      if (((col - lo).array() >= 0.0).all() && ((col - lo).array() < 3.0 * p).all()) {
        sum += col - mid;
        inside += 1.0;
      }
    }
    for (int i = 0; i < d; ++i) sum(i) += sigma_sum * rng.normal();
    const double noisy_inside = inside + sigma_count * rng.normal();
    const Point y_hat = mid + sum / std::max(noisy_inside, 1.0);
    res.candidates.push_back({z * y_hat, rel.bin});
  }

  // First candidate whose ball clears the sparse-vector threshold.
  res.svt_threshold = static_cast<double>(params.t) - 33.0 / eps * std::log(2.0 * static_cast<double>(n) / beta);
  SvtSession svt(res.svt_threshold, eq, rng);
  const double radius = 2.0 * r * (c + 1.0);
  for (const auto& cand : res.candidates) {
    const auto covered = static_cast<double>(count_in_ball(s, {cand.center, radius}));
    if (svt.query(covered, rng)) {
      res.center = cand.center;
      res.bucket = cand.source_bucket;
      break;
    }
  }
  return res;
}

std::optional<Point> solve_promise(const Dataset& s, double r, const CentralSolverParams& params, Rng& rng,
                                   PrivacyBudget& budget) {
  const std::size_t n = effective_n(params.public_n, s);
  const std::size_t m = params.resolved_repetitions(n);
  const EpsDelta one = good_center_cost(params, s.dim());
  budget.charge("promise/r=" + std::to_string(r) + "/" + std::to_string(m) + "-runs",
                compose_repeated(m, one.epsilon, one.delta, params.resolved_delta_prime()));
  PrivacyBudget scratch;
  for (std::size_t i = 0; i < m; ++i) {
    auto res = lsh_good_center(s, r, params, rng, scratch);
    if (res.center) return res.center;
  }
  return std::nullopt;
}

int radius_levels(const GridSpec& grid) {
  grid.validate();
  return static_cast<int>(
      std::ceil(std::log2(std::sqrt(static_cast<double>(grid.dimension)) * static_cast<double>(grid.side - 1))));
}

std::size_t max_probes(const GridSpec& grid) {
  return static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(radius_levels(grid)) + 2.0)));
}

namespace {

CentralSolverParams to_params(std::size_t t, double epsilon, double delta, double beta, std::size_t public_n,
                              const CentralOptions& o) {
  CentralSolverParams p;
  p.t = t;
  p.public_n = public_n;
  p.epsilon = epsilon;
  p.delta = delta;
  p.beta = beta;
  p.lsh = o.lsh;
  p.repetitions = o.repetitions;
  p.delta_prime = o.delta_prime;
  return p;
}

}  // namespace

OneClusterPlanCost solve_1cluster_cost(std::size_t n, const GridSpec& grid, double epsilon, double delta,
                                       double beta, const CentralOptions& options) {
  const CentralSolverParams p = to_params(1, epsilon, delta, beta, n, options);
  const EpsDelta gc = good_center_cost(p, grid.dimension);
  const EpsDelta promise = compose_repeated(p.resolved_repetitions(n), gc.epsilon, gc.delta, p.resolved_delta_prime());
  OneClusterPlanCost out;
  out.per_probe = {promise.epsilon + epsilon, promise.delta};
  out.probes = max_probes(grid);
  out.total = compose_repeated(out.probes, out.per_probe.epsilon, out.per_probe.delta, p.resolved_delta_prime());
  return out;
}

namespace {

struct SlackParts {
  double margin;
  double selection;
};

SlackParts slack_parts(const GridSpec& grid, double epsilon, double beta) {
  const double margin = std::log(static_cast<double>(max_probes(grid)) / beta) / epsilon;
  return {margin, 8.0 / epsilon * std::log(2.0 * radius_levels(grid) / beta) + margin};
}

}  // namespace

double solve_1cluster_slack(const GridSpec& grid, double epsilon, double beta) {
  const auto s = slack_parts(grid, epsilon, beta);
  return s.selection + s.margin;
}

Solution solve_1cluster(const Dataset& s, std::size_t t, double epsilon, double delta, double beta, Rng& rng,
                        const CentralOptions& options) {
  const std::size_t n = effective_n(options.public_n, s);
  if (t > s.size()) throw PreconditionError("solve_1cluster: t exceeds n");
  const CentralSolverParams params = to_params(t, epsilon, delta, beta, n, options);
  check_common(params);
  const double floor = good_center_floor(params, n);
  if (static_cast<double>(t) < floor)
    throw PreconditionError("solve_1cluster: t=" + std::to_string(t) + " is below the bucket-histogram floor " +
                            std::to_string(floor) + " for n=" + std::to_string(n));

  const GridSpec& grid = s.grid();
  const int levels = radius_levels(grid);
  const OneClusterPlanCost cost = solve_1cluster_cost(n, grid, epsilon, delta, beta, options);

  LshParams lp = options.lsh;
  lp.n = n;
  const LshDesign design = design_lsh(lp);
  const double c = design.c_effective;

  Solution sol;
  sol.budget_spent.charge("solve_1cluster/" + std::to_string(cost.probes) + "-probes", cost.total);

  const auto [margin, slack] = slack_parts(grid, epsilon, beta);
  const auto radius_at = [&](int j) { return std::ldexp(1.0, j) / static_cast<double>(grid.side - 1); };

  int lo = 0, hi = levels + 1, probes = 0;
  std::optional<Point> best_center;
  double best_noisy = 0.0;
  int best_j = -1;
  PrivacyBudget scratch;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    ++probes;
    const auto center = solve_promise(s, radius_at(mid), params, rng, scratch);
    bool pass = false;
    if (center) {
      const double radius = 2.0 * radius_at(mid) * (c + 1.0);
      const double noisy = static_cast<double>(count_in_ball(s, {*center, radius})) + rng.laplace(1.0 / epsilon);
      if (noisy >= static_cast<double>(t) - slack) {
        pass = true;
        best_center = center;
        best_noisy = noisy;
        best_j = mid;
      }
    }
    if (pass)
      hi = mid;
    else
      lo = mid + 1;
  }

  if (best_center) {
    sol.ball = {*best_center, 2.0 * radius_at(best_j) * (c + 1.0)};
    sol.noisy_count = best_noisy;
    sol.radius_index = best_j;
  } else {
    // The whole cube: covers every point for every dataset, so reporting n is free.
    sol.ball = {Point::Constant(s.dim(), 0.5), 0.5 * std::sqrt(static_cast<double>(s.dim()))};
    sol.noisy_count = static_cast<double>(s.size());
    sol.fallback = true;
    sol.diagnostic = "no radius level passed; returned the enclosing ball of the cube";
  }
  sol.covered = static_cast<std::size_t>(std::clamp(std::round(sol.noisy_count), 0.0, static_cast<double>(s.size())));
  sol.coverage_slack = slack + margin;

  const double p_eff = design.p_side;
  const std::size_t m = params.resolved_repetitions(n);
  auto& dg = sol.diagnostics;
  dg["c_requested"] = design.c_requested;
  dg["c_effective"] = c;
  dg["p_eff"] = p_eff;
  dg["q_eff"] = design.q_side;
  dg["lsh_concat"] = design.concat;
  dg["lsh_width_ratio"] = design.width_ratio;
  dg["repetitions"] = static_cast<double>(m);
  dg["radius_levels"] = levels;
  dg["probes_max"] = static_cast<double>(cost.probes);
  dg["probes_run"] = probes;
  dg["selection_slack"] = slack;
  dg["count_margin"] = margin;
  dg["bucket_histogram_floor"] = floor;
  dg["listing_bucket_threshold"] = 960.0 * std::sqrt(static_cast<double>(s.dim())) / epsilon *
                                   std::log(static_cast<double>(n) * s.dim() / (beta * delta)) *
                                   std::sqrt(std::log(8.0 / delta));
  dg["good_center_success_floor"] = p_eff / 4.0;
  dg["promise_success_floor"] = 1.0 - std::pow(1.0 - p_eff / 4.0, static_cast<double>(m));
  dg["fail_prob_far_pair_collision"] = static_cast<double>(n) * static_cast<double>(n) * design.q_side / 2.0;
  dg["fail_prob_histogram"] = beta;
  dg["fail_prob_rotation"] = beta;
  dg["fail_prob_above_threshold"] = beta;
  dg["fail_prob_count"] = beta;
  dg["good_center_slack"] = 65.0 / epsilon * std::log(2.0 * static_cast<double>(n) / beta);
  return sol;
}

}  // namespace dpc
