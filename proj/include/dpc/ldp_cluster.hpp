#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpc/central.hpp"
#include "dpc/local.hpp"
#include "dpc/lsh.hpp"

namespace dpc {

struct LdpClusterOptions {
  LshParams lsh;               // r and n are filled in per call
  std::size_t repetitions = 0;  // K; 0: ceil(4 n^a ln(1/beta))
  std::size_t list_cap = 0;     // L; 0: ceil(64 n^{1+b} / t)
  bool compress = false;        // fixed-point averaging messages
};

// Users are split twice: into J*K good-center groups, and independently into
// J*K*L counting groups. Group sizes differ by at most one.
struct Ldp1ClusterPlan {
  int levels = 0;               // J
  std::size_t repetitions = 0;  // K
  std::size_t list_cap = 0;     // L
  std::vector<std::size_t> users;
  std::vector<std::size_t> pair_group;    // per position in `users`: j*K + k
  std::vector<std::size_t> triple_group;  // per position: (j*K + k)*L + l

  std::size_t pair_count() const { return static_cast<std::size_t>(levels) * repetitions; }
  std::size_t triple_count() const { return pair_count() * list_cap; }
  std::vector<std::vector<std::size_t>> pair_members() const;
  std::vector<std::vector<std::size_t>> triple_members() const;

  static Ldp1ClusterPlan build(std::span<const std::size_t> users, const GridSpec& grid, std::size_t t, double beta,
                               const LdpClusterOptions& options, Rng& rng);
};

// Equal-size random partition of `count` positions into `groups` labels.
std::vector<std::size_t> random_partition(std::size_t count, std::size_t groups, Rng& rng);

// Radius grid for the local solver: r_j = 2^j / (|X| - 1), j = 0..J-1.
inline double ldp_radius(const GridSpec& grid, int j) { return std::ldexp(1.0, j) * grid.step(); }

struct LdpGoodCenterParams {
  double r = 1.0;
  std::size_t t = 1;
  double epsilon = 1.0;
  double beta = 0.05;
  std::size_t list_cap = 1;
  bool compress = false;
  LshDesign design;
};

// One run of the local good-center protocol, split at its round boundary so
// that many runs can share rounds. Round one: every user sends a bucket
// report and a (interval, bucket) report. Round two: the averaging step over
// the boxes of the heavy buckets.
class LdpGoodCenterSession {
 public:
  LdpGoodCenterSession(std::vector<std::size_t> users, int dim, const LdpGoodCenterParams& params,
                       const ExclusionPredicate& sigma, std::string label, Rng& rng);

  void round_one(LrOracle& oracle, Rng& rng);
  void round_two(LrOracle& oracle, Rng& rng);

  const std::vector<CandidateCenter>& candidates() const { return candidates_; }
  const LshFunction& hash() const { return h_; }
  const Eigen::MatrixXd& basis() const { return z_; }
  double interval_length() const { return p_len_; }
  double list_threshold() const { return list_threshold_; }
  const std::vector<HeavyHitter>& heavy() const { return heavy_; }
  std::uint64_t bucket_universe() const { return bucket_universe_; }

  // Per-user epsilon of one full session.
  static double user_cost(double epsilon) { return 0.75 * epsilon; }

 private:
  std::vector<std::size_t> users_;
  int d_;
  LdpGoodCenterParams params_;
  const ExclusionPredicate& sigma_;
  std::string label_;
  std::uint64_t bucket_universe_;
  LshFunction h_;
  Eigen::MatrixXd z_;
  double p_len_;
  std::int64_t jlo_;
  std::size_t slots_;
  std::vector<HeavyHitter> heavy_;
  std::vector<Point> box_lo_;  // rotated coordinates, one per heavy bucket
  double list_threshold_ = 0.0;
  std::vector<CandidateCenter> candidates_;
};

// Standalone good-center run over two oracle rounds.
std::vector<CandidateCenter> ldp_good_center(LrOracle& oracle, std::span<const std::size_t> users, double r,
                                             std::size_t t, double epsilon, double beta,
                                             const ExclusionPredicate& sigma, const LshParams& lsh,
                                             std::size_t list_cap, Rng& rng, bool compress = false);

// Selection slack for JKL-scaled group counts: sampling plus randomized
// response error, each at beta/2 across all groups.
double ldp_selection_slack(std::size_t n, std::size_t groups, double epsilon, double beta);

// Three oracle rounds. epsilon is the protocol's per-user budget.
Solution ldp_1cluster(LrOracle& oracle, std::span<const std::size_t> users, std::size_t t, double epsilon,
                      double beta, const ExclusionPredicate& sigma, Rng& rng, const LdpClusterOptions& options = {});

}  // namespace dpc
