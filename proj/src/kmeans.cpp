#include "dpc/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpc {

void WeightedCenterSet::add(Point center, double weight) {
  if (!(weight >= 0.0)) throw PreconditionError("weighted center set: weights must be non-negative");
  centers.push_back(std::move(center));
  weights.push_back(weight);
}

namespace {

double nearest_sq(const PointRef& x, const CenterList& centers, int* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double v = (x - centers[c]).squaredNorm();
    if (v < best) {
      best = v;
      if (which) *which = static_cast<int>(c);
    }
  }
  return best;
}

double weighted_cost(const PointMatrix& xs, std::span<const double> w, const CenterList& centers) {
  if (centers.empty()) throw PreconditionError("cost: no centers");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < xs.cols(); ++j)
    acc += (w.empty() ? 1.0 : w[static_cast<std::size_t>(j)]) * nearest_sq(xs.col(j), centers);
  return acc;
}

PointMatrix stack(const std::vector<Point>& ps) {
  PointMatrix m(ps.front().size(), static_cast<Eigen::Index>(ps.size()));
  for (std::size_t j = 0; j < ps.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = ps[j];
  return m;
}

std::size_t sample_weighted(std::span<const double> w, double total, Rng& rng) {
  double u = rng.uniform() * total;
  for (std::size_t j = 0; j < w.size(); ++j) {
    u -= w[j];
    if (u < 0.0 && w[j] > 0.0) return j;
  }
  for (std::size_t j = w.size(); j > 0; --j)
    if (w[j - 1] > 0.0) return j - 1;
  return 0;
}

CenterList seed_plus_plus(const PointMatrix& xs, std::span<const double> w, int k, Rng& rng) {
  const auto n = static_cast<std::size_t>(xs.cols());
  CenterList centers;
  centers.push_back(xs.col(static_cast<Eigen::Index>(sample_weighted(w, std::accumulate(w.begin(), w.end(), 0.0), rng))));
  std::vector<double> d2(n), score(n);
  for (std::size_t j = 0; j < n; ++j) d2[j] = (xs.col(static_cast<Eigen::Index>(j)) - centers[0]).squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += score[j] = w[j] * d2[j];
    // Every weighted point already sits on a center: repeat one.
    const std::size_t pick = total > 0.0 ? sample_weighted(score, total, rng) : rng.index(n);
    centers.push_back(xs.col(static_cast<Eigen::Index>(pick)));
    for (std::size_t j = 0; j < n; ++j)
      d2[j] = std::min(d2[j], (xs.col(static_cast<Eigen::Index>(j)) - centers.back()).squaredNorm());
  }
  return centers;
}

double lloyd(const PointMatrix& xs, std::span<const double> w, CenterList& centers) {
  const int k = static_cast<int>(centers.size());
  const int d = static_cast<int>(xs.rows());
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, k);
    std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
    double now = 0.0;
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
      int c = 0;
      const double wj = w[static_cast<std::size_t>(j)];
      now += wj * nearest_sq(xs.col(j), centers, &c);
      sums.col(c) += wj * xs.col(j);
      mass[static_cast<std::size_t>(c)] += wj;
    }
    for (int c = 0; c < k; ++c)
      if (mass[static_cast<std::size_t>(c)] > 0.0) centers[static_cast<std::size_t>(c)] = sums.col(c) / mass[static_cast<std::size_t>(c)];
    if (prev < std::numeric_limits<double>::infinity() && std::abs(prev - now) <= 1e-6 * std::max(prev, 1e-300)) break;
    prev = now;
  }
  return weighted_cost(xs, w, centers);
}

}  // namespace

double cost(const PointMatrix& xs, const CenterList& centers) { return weighted_cost(xs, {}, centers); }
double cost(const Dataset& s, const CenterList& centers) { return cost(s.points(), centers); }
double cost(const WeightedCenterSet& b, const CenterList& centers) {
  if (b.empty()) return 0.0;
  return weighted_cost(stack(b.centers), b.weights, centers);
}

CenterList weighted_kmeans(const PointMatrix& xs, std::span<const double> weights, int k, Rng& rng, int restarts) {
  if (xs.cols() == 0) throw PreconditionError("weighted_kmeans: empty input");
  if (k < 1) throw PreconditionError("weighted_kmeans: k must be positive");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(static_cast<std::size_t>(xs.cols()), 1.0);
  if (w.size() != static_cast<std::size_t>(xs.cols())) throw PreconditionError("weighted_kmeans: weight count mismatch");
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) std::fill(w.begin(), w.end(), 1.0);
  CenterList best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    CenterList c = seed_plus_plus(xs, w, k, rng);
    const double v = lloyd(xs, w, c);
    if (v < best_cost) {
      best_cost = v;
      best = std::move(c);
    }
  }
  return best;
}

CenterList weighted_kmeans_approx(const WeightedCenterSet& b, int k, Rng& rng) {
  if (b.empty()) throw NotFound("weighted_kmeans_approx: the weighted center set is empty");
  return weighted_kmeans(stack(b.centers), b.weights, k, rng);
}

CenterList lloyd_baseline(const Dataset& s, int k, Rng& rng) { return weighted_kmeans(s.points(), {}, k, rng); }

BallFinder oracle_ball_finder() {
  return [](const Dataset& s, std::size_t t) {
    const Ball b = oracle_min_ball(s, t);
    std::vector<std::pair<double, std::size_t>> by_dist(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) by_dist[j] = {(s.point(j) - b.center).squaredNorm(), j};
    std::partial_sort(by_dist.begin(), by_dist.begin() + static_cast<std::ptrdiff_t>(t), by_dist.end());
    BallChoice out{b, {}};
    for (std::size_t j = 0; j < t; ++j) out.members.push_back(by_dist[j].second);
    return out;
  };
}

KMeansResult nonprivate_kmean_reference(const Dataset& s, const KMeansParams& params, const BallFinder& finder,
                                        Rng& rng) {
  if (params.k < 1) throw PreconditionError("k-means: k must be positive");
  const double k = params.k;
  KMeansResult res;
  res.nu = params.nu;
  res.t_min = params.t_min;
  std::vector<std::size_t> alive(s.size());
  std::iota(alive.begin(), alive.end(), 0);
  while (static_cast<double>(alive.size()) > params.t_min) {
    const std::size_t ni = alive.size();
    const auto t = static_cast<std::size_t>(std::floor(3.0 * static_cast<double>(ni) / (8.0 * k)));
    if (t == 0) break;
    const Dataset cur = s.subset(alive);
    const BallChoice g = finder(cur, t);
    const double sz = static_cast<double>(g.members.size());
    if (sz < static_cast<double>(ni) / (4.0 * k) || sz > 3.0 * static_cast<double>(ni) / (8.0 * k))
      throw NotFound("k-means: ball finder returned " + std::to_string(g.members.size()) + " points, outside [" +
                     std::to_string(static_cast<double>(ni) / (4.0 * k)) + ", " +
                     std::to_string(3.0 * static_cast<double>(ni) / (8.0 * k)) + "]");
    IterationRecord rec;
    rec.remaining = ni;
    rec.remaining_hat = static_cast<double>(ni);
    rec.target = t;
    rec.ball = g.ball;
    rec.in_ball = g.members.size();
    rec.in_ball_hat = sz;
    rec.excluded = g.members.size();
    rec.weight = sz;
    res.trace.push_back(rec);
    res.weighted.add(g.ball.center, sz);
    std::vector<bool> drop(ni, false);
    for (auto m : g.members) drop[m] = true;
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < ni; ++j)
      if (!drop[j]) next.push_back(alive[j]);
    alive.swap(next);
  }
  res.final_remaining = alive.size();
  res.final_remaining_hat = static_cast<double>(alive.size());
  res.centers = weighted_kmeans_approx(res.weighted, params.k, rng);
  res.additive_term = (params.nu * k * std::log(static_cast<double>(std::max<std::size_t>(s.size(), 2))) + params.t_min) *
                      std::sqrt(static_cast<double>(s.dim()));
  return res;
}

std::size_t kmeans_iteration_cap(std::size_t n, int k) {
  return static_cast<std::size_t>(std::ceil(4.0 * k * std::log(static_cast<double>(std::max<std::size_t>(n, 2)))));
}

namespace {

int hash_independence(double beta) { return std::max(1, static_cast<int>(std::ceil(std::log(1.0 / beta)))); }

double additive(double nu, int k, std::size_t n, double t_min, int d) {
  return (nu * k * std::log(static_cast<double>(std::max<std::size_t>(n, 2))) + t_min) * std::sqrt(static_cast<double>(d));
}

double keep_probability(double n_hat, double b_hat, int k) {
  if (b_hat <= 0.0) return 1.0;
  return std::clamp(5.0 * n_hat / (16.0 * k * b_hat), 0.0, 1.0);
}

void check_kmeans_args(int k, double epsilon, double beta) {
  if (k < 1) throw PreconditionError("k-means: k must be positive");
  if (!(epsilon > 0.0)) throw PreconditionError("k-means: epsilon must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("k-means: beta must lie in (0, 1)");
}

}  // namespace

// ---- centralized ----------------------------------------------------------------

KMeansResult dp_kmeans_centralized(const Dataset& s, int k, double epsilon, double delta, double beta, Rng& rng,
                                   const DpKMeansOptions& options) {
  check_kmeans_args(k, epsilon, beta);
  const std::size_t n = s.size();
  const double nd = static_cast<double>(n), kd = k;
  const GridSpec& grid = s.grid();
  const std::size_t cap = kmeans_iteration_cap(n, k);

  KMeansResult res;
  res.max_iterations = cap;
  // Laplace counts shifted down by their tail so they never overshoot.
  const double tail = std::log(2.0 * static_cast<double>(cap) / beta) / epsilon;
  res.nu = 2.0 * tail;
  res.cluster_slack = solve_1cluster_slack(grid, epsilon, beta);
  if (res.cluster_slack > nd / (8.0 * kd))
    throw PreconditionError("dp_kmeans_centralized: the 1-cluster slack " + std::to_string(res.cluster_slack) +
                            " exceeds n/8k; need n >= " + std::to_string(std::ceil(8.0 * kd * res.cluster_slack)));

  CentralOptions co = options.cluster;
  co.public_n = n;
  CentralSolverParams fp;
  fp.epsilon = epsilon;
  fp.delta = delta;
  fp.beta = beta;
  const double floor = good_center_floor(fp, n);
  // t_i > t_min keeps every 1-cluster call above the bucket-histogram floor.
  res.t_min = std::max(options.t_min, std::ceil(std::max(9.0 * res.nu + 6.0 * res.cluster_slack, floor)));
  res.t_min_raised = options.t_min > 0.0 && res.t_min > options.t_min;
  if (res.t_min_raised) res.warnings.push_back("t_min raised to " + std::to_string(res.t_min));

  const auto one = solve_1cluster_cost(n, grid, epsilon, delta, beta, co);
  const EpsDelta per_iter{one.total.epsilon + 2.0 * epsilon, one.total.delta};
  const double dprime = options.delta_prime > 0.0 ? options.delta_prime : delta;
  res.privacy = compose_repeated(cap, per_iter.epsilon, per_iter.delta, dprime);
  res.budget.charge("kmeans/" + std::to_string(cap) + "-iterations", res.privacy);

  ExclusionPredicate sigma;
  const int lambda = hash_independence(beta);
  std::vector<std::size_t> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  double n_hat = nd;
  while (n_hat > 8.0 * kd / 3.0 * res.t_min && res.trace.size() < cap) {
    IterationRecord rec;
    rec.remaining = alive.size();
    rec.remaining_hat = n_hat;
    rec.target = static_cast<std::size_t>(std::floor(3.0 * n_hat / (8.0 * kd)));
    const Dataset cur = s.subset(alive);
    const Solution sol = solve_1cluster(cur, std::min(rec.target, cur.size()), epsilon, delta, beta, rng, co);
    rec.ball = sol.ball;
    rec.cluster_fallback = sol.fallback;
    rec.in_ball = count_in_ball(cur, sol.ball);
    rec.in_ball_hat = static_cast<double>(rec.in_ball) + rng.laplace(1.0 / epsilon) - tail;
    rec.keep_probability = keep_probability(n_hat, rec.in_ball_hat, k);
    const MemberHash h = MemberHash::sample(lambda, rec.keep_probability, rng);
    sigma.append({sol.ball.center, sol.ball.radius, h});
    rec.weight = rec.in_ball_hat * rec.keep_probability - res.nu;
    res.weighted.add(sol.ball.center, std::max(rec.weight, 0.0));

    std::vector<std::size_t> next;
    for (auto j : alive)
      if (sigma(s.point(j)))
        ++rec.excluded;
      else
        next.push_back(j);
    alive.swap(next);
    n_hat = static_cast<double>(alive.size()) + rng.laplace(1.0 / epsilon) - tail;
    res.trace.push_back(rec);
  }
  res.stopped_by_cap = n_hat > 8.0 * kd / 3.0 * res.t_min;
  res.final_remaining = alive.size();
  res.final_remaining_hat = n_hat;
  res.exclusions = sigma;
  res.additive_term = additive(res.nu, k, n, res.t_min, s.dim());
  res.centers = weighted_kmeans_approx(res.weighted, k, rng);
  return res;
}

// ---- local ----------------------------------------------------------------------

double ldp_kmeans_nu(std::size_t n, double epsilon, double beta) {
  const double nd = static_cast<double>(n);
  const double listing = 16.0 / epsilon * std::sqrt(nd * std::log(8.0 / beta));
  return std::max({listing, 2.0 * ldp_count_error(n, epsilon, beta), std::sqrt(8.0 * nd * std::log(1.0 / beta))});
}

double ldp_cluster_delta(std::size_t n, const GridSpec& grid, std::size_t t, double epsilon, double beta,
                         const LdpClusterOptions& options) {
  const double nd = static_cast<double>(n);
  const std::size_t K = options.repetitions
                            ? options.repetitions
                            : static_cast<std::size_t>(std::ceil(4.0 * std::pow(nd, options.lsh.a) * std::log(1.0 / beta)));
  const std::size_t L = options.list_cap ? options.list_cap
                                         : static_cast<std::size_t>(std::ceil(64.0 * std::pow(nd, 1.0 + options.lsh.b) /
                                                                              static_cast<double>(std::max<std::size_t>(t, 1))));
  const std::size_t G = static_cast<std::size_t>(radius_levels(grid)) * K * L;
  return 2.0 * ldp_selection_slack(n, G, epsilon / 2.0, beta);
}

double ldp_kmeans_user_budget(std::size_t n, int k, double epsilon) {
  return static_cast<double>(kmeans_iteration_cap(n, k)) * (7.0 / 8.0 + 2.0) * epsilon;
}

double ldp_kmeans_epsilon(std::size_t n, int k, double epsilon, double delta) {
  const double rounds = 12.0 * k * std::log(static_cast<double>(n));
  return std::sqrt(2.0 * rounds * std::log(1.0 / delta)) * epsilon + rounds * epsilon * std::expm1(epsilon);
}

KMeansResult ldp_kmeans(LrOracle& oracle, int k, double epsilon, double delta, double beta, Rng& rng,
                        const LdpKMeansOptions& options) {
  check_kmeans_args(k, epsilon, beta);
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("ldp_kmeans: delta must lie in (0, 1)");
  const std::size_t n = oracle.size();
  const double nd = static_cast<double>(n), kd = k;
  const GridSpec& grid = oracle.grid();
  if (oracle.declared_epsilon() < ldp_kmeans_user_budget(n, k, epsilon) * (1.0 - 1e-12))
    throw PreconditionError("ldp_kmeans: the oracle's declared epsilon " + std::to_string(oracle.declared_epsilon()) +
                            " is below the per-user need " + std::to_string(ldp_kmeans_user_budget(n, k, epsilon)));

  KMeansResult res;
  res.max_iterations = kmeans_iteration_cap(n, k);
  res.nu = ldp_kmeans_nu(n, epsilon, beta);
  const double tail = ldp_count_error(n, epsilon, beta);

  // t_min >= 9 nu + 6 Delta, where Delta itself depends on t through the list cap.
  double t_min = std::max(options.t_min, 1.0);
  for (int i = 0; i < 32; ++i) {
    const auto t_low = static_cast<std::size_t>(std::max(1.0, std::min(t_min, nd)));
    const double need = 9.0 * res.nu + 6.0 * ldp_cluster_delta(n, grid, t_low, epsilon, beta, options.cluster);
    if (t_min >= need) break;
    t_min = need;
  }
  res.t_min = std::ceil(t_min);
  res.cluster_slack = ldp_cluster_delta(n, grid, static_cast<std::size_t>(std::min(res.t_min, nd)), epsilon, beta,
                                        options.cluster);
  res.t_min_raised = res.t_min > options.t_min;
  if (res.t_min_raised && options.t_min > 0.0)
    res.warnings.push_back("t_min raised from " + std::to_string(options.t_min) + " to " + std::to_string(res.t_min));
  if (epsilon > 1.0) res.warnings.push_back("epsilon > 1: counts use the Hoeffding error bound");

  for (std::size_t i = 0; i < 3 * res.max_iterations; ++i)
    res.budget.charge("kmeans/interaction", epsilon, 0.0);
  res.privacy = {ldp_kmeans_epsilon(n, k, epsilon, delta), delta};

  std::vector<std::size_t> users(n);
  std::iota(users.begin(), users.end(), 0);
  ExclusionPredicate sigma;
  const int lambda = hash_independence(beta);
  double n_hat = nd;
  while (n_hat > 8.0 * kd / 3.0 * res.t_min && res.trace.size() < res.max_iterations) {
    IterationRecord rec;
    rec.remaining_hat = n_hat;
    rec.target = static_cast<std::size_t>(std::floor(3.0 * n_hat / (8.0 * kd)));
    const Solution sol = ldp_1cluster(oracle, users, std::max<std::size_t>(rec.target, 1), epsilon, beta, sigma, rng,
                                      options.cluster);
    rec.ball = sol.ball;
    rec.cluster_fallback = sol.fallback;
    const Ball ball = sol.ball;
    const auto in_ball = [&, ball](const PointRef& x) { return !sigma(x) && (x - ball.center).norm() <= ball.radius; };
    oracle.begin_round();
    rec.in_ball_hat = ldp_count(oracle, users, in_ball, epsilon, "kmeans/in-ball", rng).value - tail;
    rec.keep_probability = keep_probability(n_hat, rec.in_ball_hat, k);
    const MemberHash h = MemberHash::sample(lambda, rec.keep_probability, rng);
    sigma.append({ball.center, ball.radius, h});
    rec.weight = rec.in_ball_hat * rec.keep_probability - res.nu;
    res.weighted.add(ball.center, std::max(rec.weight, 0.0));
    oracle.begin_round();
    n_hat = ldp_count(oracle, users, [&](const PointRef& x) { return !sigma(x); }, epsilon, "kmeans/remaining", rng)
                .value - tail;
    oracle.begin_round();
    res.trace.push_back(rec);
  }
  res.stopped_by_cap = n_hat > 8.0 * kd / 3.0 * res.t_min;
  res.final_remaining_hat = n_hat;
  res.exclusions = sigma;
  res.additive_term = additive(res.nu, k, n, res.t_min, grid.dimension);
  if (res.weighted.empty())
    throw NotFound("ldp_kmeans: the loop never ran; n-hat " + std::to_string(nd) + " <= (8k/3) t_min = " +
                   std::to_string(8.0 * kd / 3.0 * res.t_min));
  res.centers = weighted_kmeans_approx(res.weighted, k, rng);
  return res;
}

// ---- trace --------------------------------------------------------------------

void annotate_trace(KMeansResult& result, const Dataset& s) {
  const auto& recs = result.exclusions.records();
  if (recs.size() != result.trace.size()) throw PreconditionError("annotate_trace: trace and exclusions disagree");
  std::vector<bool> gone(s.size(), false);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto& it = result.trace[i];
    const auto& r = recs[i];
    it.remaining = it.in_ball = it.excluded = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (gone[j]) continue;
      ++it.remaining;
      const auto x = s.point(j);
      if ((x - r.center).norm() > r.radius) continue;
      ++it.in_ball;
      if (r.member(x)) {
        ++it.excluded;
        gone[j] = true;
      }
    }
  }
  result.final_remaining = static_cast<std::size_t>(std::count(gone.begin(), gone.end(), false));
}

TraceCheck validate_trace(const KMeansResult& result, int k, double beta) {
  TraceCheck out;
  const double kd = k, nu = result.nu;
  const double ln = std::log(1.0 / beta);
  const auto within = [&](double est, double truth) { return est <= truth + 1e-9 && est >= truth - nu - 1e-9; };
  const auto note = [&](const std::string& s) {
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += s;
  };

  out.successful = !result.stopped_by_cap && within(result.final_remaining_hat, static_cast<double>(result.final_remaining));
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const auto& it = result.trace[i];
    const double b = static_cast<double>(it.in_ball), g = static_cast<double>(it.excluded);
    const bool step_ok = !it.cluster_fallback &&
                         b >= static_cast<double>(it.target) - result.cluster_slack &&
                         within(it.in_ball_hat, b) && within(it.remaining_hat, static_cast<double>(it.remaining)) &&
                         std::abs(g - it.keep_probability * b) <= std::sqrt(8.0 * b * ln);
    if (!step_ok) {
      out.successful = false;
      note("iteration " + std::to_string(i + 1) + " missed an accuracy event");
    }
    const double ni = static_cast<double>(it.remaining);
    if (g < ni / (4.0 * kd) || g > 3.0 * ni / (8.0 * kd)) {
      out.group_sizes = false;
      note("iteration " + std::to_string(i + 1) + ": |G|=" + std::to_string(it.excluded) + " outside [n/4k, 3n/8k]");
    }
    if (it.weight > g + 1e-9 || it.weight < g - 3.0 * nu - 1e-9) {
      out.weights = false;
      note("iteration " + std::to_string(i + 1) + ": weight outside [|G| - 3 nu, |G|]");
    }
    const std::size_t next = i + 1 < result.trace.size() ? result.trace[i + 1].remaining : result.final_remaining;
    if (next > it.remaining) out.monotone = false;
  }
  const double t_prime = 8.0 * kd / 3.0 * result.t_min + nu;
  if (static_cast<double>(result.final_remaining) > t_prime) {
    out.stopping = false;
    note("final remaining count exceeds (8k/3) t_min + nu");
  }
  if (!result.trace.empty() && result.final_remaining >= result.trace.back().remaining) out.stopping = false;
  if (result.trace.size() > result.max_iterations) out.stopping = false;
  return out;
}

}  // namespace dpc
