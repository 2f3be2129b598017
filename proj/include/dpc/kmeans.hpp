#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpc/central.hpp"
#include "dpc/ldp_cluster.hpp"
#include "dpc/local.hpp"

namespace dpc {

using CenterList = std::vector<Point>;

struct WeightedCenterSet {
  std::vector<Point> centers;
  std::vector<double> weights;

  void add(Point center, double weight);
  std::size_t size() const { return centers.size(); }
  bool empty() const { return centers.empty(); }
};

// Sum over points of (weight times) the squared distance to the nearest center.
double cost(const PointMatrix& xs, const CenterList& centers);
double cost(const Dataset& s, const CenterList& centers);
double cost(const WeightedCenterSet& b, const CenterList& centers);

// Weighted k-means++ seeding, then Lloyd until the relative cost change drops
// below 1e-6 or 100 iterations; the cheapest of `restarts` runs.
CenterList weighted_kmeans(const PointMatrix& xs, std::span<const double> weights, int k, Rng& rng,
                           int restarts = 5);
CenterList weighted_kmeans_approx(const WeightedCenterSet& b, int k, Rng& rng);

// Non-private reference point: the same routine on the raw data.
CenterList lloyd_baseline(const Dataset& s, int k, Rng& rng);

struct KMeansParams {
  int k = 1;
  double nu = 0.0;
  double w = 1.0;
  double t_min = 1.0;
  double epsilon = 1.0;
  double delta = 1e-6;
  double beta = 0.05;
};

struct BallChoice {
  Ball ball;
  std::vector<std::size_t> members;  // indices into the dataset handed to the finder
};
using BallFinder = std::function<BallChoice(const Dataset&, std::size_t t)>;

// Smallest data-centered ball holding t points; members are the t nearest.
BallFinder oracle_ball_finder();

struct IterationRecord {
  std::size_t remaining = 0;  // n_i, exact
  double remaining_hat = 0.0;
  std::size_t target = 0;  // t_i
  Ball ball;
  bool cluster_fallback = false;
  std::size_t in_ball = 0;  // b_i, exact
  double in_ball_hat = 0.0;
  double keep_probability = 1.0;
  std::size_t excluded = 0;  // |G_i|, exact
  double weight = 0.0;       // raw, may be negative
};

struct KMeansResult {
  CenterList centers;
  WeightedCenterSet weighted;
  std::vector<IterationRecord> trace;
  std::size_t max_iterations = 0;
  bool stopped_by_cap = false;
  std::size_t final_remaining = 0;
  double final_remaining_hat = 0.0;
  double nu = 0.0;
  double cluster_slack = 0.0;  // Delta of the 1-cluster solver
  double t_min = 0.0;
  bool t_min_raised = false;
  double additive_term = 0.0;  // (nu k ln n + t_min) * sqrt(d)
  ExclusionPredicate exclusions;
  PrivacyBudget budget;
  EpsDelta privacy;  // composed guarantee of the whole run
  std::vector<std::string> warnings;
};

KMeansResult nonprivate_kmean_reference(const Dataset& s, const KMeansParams& params, const BallFinder& finder,
                                        Rng& rng);

struct DpKMeansOptions {
  CentralOptions cluster;
  double t_min = 0.0;        // 0: the smallest admissible value
  double delta_prime = 0.0;  // composition slack across iterations; 0: delta
};

// Loop iterations allowed: ceil(4 k ln n).
std::size_t kmeans_iteration_cap(std::size_t n, int k);

// epsilon, delta are per-step parameters; result.privacy is the composed total.
KMeansResult dp_kmeans_centralized(const Dataset& s, int k, double epsilon, double delta, double beta, Rng& rng,
                                   const DpKMeansOptions& options = {});

struct LdpKMeansOptions {
  LdpClusterOptions cluster;
  double t_min = 0.0;  // raised to 9 nu + 6 Delta when below it
};

// (16/eps) sqrt(n ln(8/beta)), lifted where needed so that it still covers the
// two-sided count error and the exclusion-hash deviation.
double ldp_kmeans_nu(std::size_t n, double epsilon, double beta);

// Coverage slack of ldp_1cluster for a given target size.
double ldp_cluster_delta(std::size_t n, const GridSpec& grid, std::size_t t, double epsilon, double beta,
                         const LdpClusterOptions& options);

// Per-user epsilon under basic composition for the iteration cap.
double ldp_kmeans_user_budget(std::size_t n, int k, double epsilon);

// sqrt(24 k ln n ln(1/delta)) eps + 12 k ln n eps (e^eps - 1).
double ldp_kmeans_epsilon(std::size_t n, int k, double epsilon, double delta);

// epsilon is per interaction; the oracle's declared budget must cover
// ldp_kmeans_user_budget.
KMeansResult ldp_kmeans(LrOracle& oracle, int k, double epsilon, double delta, double beta, Rng& rng,
                        const LdpKMeansOptions& options = {});

struct TraceCheck {
  bool successful = false;  // every step met its accuracy event
  bool group_sizes = true;  // n_i/4k <= |G_i| <= 3 n_i/8k
  bool weights = true;      // |G_i| - 3 nu <= alpha_i <= |G_i|
  bool stopping = true;
  bool monotone = true;
  std::string detail;

  bool ok() const { return !successful || (group_sizes && weights && stopping && monotone); }
};

// Fills the exact per-iteration counts (n_i, b_i, |G_i|) of a private run by
// replaying its exclusion records on the raw data. Evaluation only.
void annotate_trace(KMeansResult& result, const Dataset& s);

// Replays an annotated trace as a run of the non-private loop with
// t'_min = (8k/3) t_min + nu and checks that loop's conditions.
TraceCheck validate_trace(const KMeansResult& result, int k, double beta);

}  // namespace dpc
