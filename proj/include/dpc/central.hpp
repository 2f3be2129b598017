#pragma once

#include <optional>
#include <vector>

#include "dpc/core.hpp"
#include "dpc/lsh.hpp"
#include "dpc/rng.hpp"

namespace dpc {

struct CentralSolverParams {
  std::size_t t = 1;
  std::size_t public_n = 0;  // 0: the dataset size
  double epsilon = 1.0;
  double delta = 1e-6;
  double beta = 0.05;
  LshParams lsh;                // r and n are filled in per call
  std::size_t repetitions = 0;  // 0: ceil(n^a ln(3/beta))
  double delta_prime = 0.0;     // slack for composing repetitions; 0: delta

  std::size_t resolved_repetitions(std::size_t n) const;
  double resolved_delta_prime() const { return delta_prime > 0.0 ? delta_prime : delta; }
};

struct CandidateCenter {
  Point center;
  std::uint64_t source_bucket = 0;
};

struct GoodCenterResult {
  std::optional<Point> center;
  std::uint64_t bucket = 0;
  std::vector<CandidateCenter> candidates;
  std::size_t heavy_buckets = 0;
  double histogram_threshold = 0.0;
  double interval_length = 0.0;
  double svt_threshold = 0.0;
  LshDesign design;
};

// Per-call cost of lsh_good_center; independent of the data.
EpsDelta good_center_cost(const CentralSolverParams& params, int d);

// Smallest t the bucket histogram can serve.
double good_center_floor(const CentralSolverParams& params, std::size_t n);

GoodCenterResult lsh_good_center(const Dataset& s, double r, const CentralSolverParams& params, Rng& rng,
                                 PrivacyBudget& budget);

// Up to m independent lsh_good_center runs; charges all m at once.
std::optional<Point> solve_promise(const Dataset& s, double r, const CentralSolverParams& params, Rng& rng,
                                   PrivacyBudget& budget);

struct CentralOptions {
  LshParams lsh;
  std::size_t repetitions = 0;
  double delta_prime = 0.0;
  // Size used for parameter choices when s is a public-predicate subset of a
  // larger dataset; 0 means s.size().
  std::size_t public_n = 0;
};

// Radius grid r_j = 2^j / (|X| - 1), j = 0..J with J = ceil(log2(sqrt(d) (|X| - 1))).
int radius_levels(const GridSpec& grid);
std::size_t max_probes(const GridSpec& grid);

struct OneClusterPlanCost {
  EpsDelta per_probe;
  EpsDelta total;
  std::size_t probes = 0;
};
OneClusterPlanCost solve_1cluster_cost(std::size_t n, const GridSpec& grid, double epsilon, double delta,
                                       double beta, const CentralOptions& options);

// Coverage slack solve_1cluster vouches for; independent of the data.
double solve_1cluster_slack(const GridSpec& grid, double epsilon, double beta);

// Binary search over the radius grid. epsilon and delta are the per-step
// parameters of every good-center run and every count; the composed total is
// in budget_spent.
Solution solve_1cluster(const Dataset& s, std::size_t t, double epsilon, double delta, double beta, Rng& rng,
                        const CentralOptions& options = {});

}  // namespace dpc
