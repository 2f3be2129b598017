#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dpc/core.hpp"
#include "dpc/rng.hpp"

namespace dpc {

struct LshParams {
  double r = 1.0;
  double c = 4.0;
  double a = 0.2;
  double b = 0.1;
  std::size_t n = 2;
  bool adjust_c = true;  // raise c to the smallest feasible value instead of failing

  double target_p() const;  // n^{-b}
  double target_q() const;  // n^{-2-a}
  void validate() const;
};

// Width (as a multiple of r) and concatenation count chosen for a parameter set.
// The choice is scale free, so one design serves every radius.
struct LshDesign {
  double width_ratio = 1.0;
  int concat = 1;
  double c_requested = 0.0;
  double c_effective = 0.0;
  double p_side = 0.0;  // analytic collision probability at distance r
  double q_side = 0.0;  // analytic collision probability at distance c_effective * r
  double target_p = 0.0;
  double target_q = 0.0;
};

// Collision probability of one quantized Gaussian projection for two points at
// distance s, as a function of s / width.
double projection_collision_probability(double distance_over_width);

// Throws LshInfeasible (carrying the smallest workable c) when params.c is
// infeasible and adjust_c is off.
LshDesign design_lsh(const LshParams& params);

// AND-concatenation of quantized Gaussian projections followed by a
// pairwise-independent rehash into [0, universe).
class LshFunction {
 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  LshFunction(Eigen::MatrixXd directions, Eigen::VectorXd offsets, double width, std::vector<std::uint64_t> rehash,
              std::uint64_t universe);

  int dim() const { return static_cast<int>(directions_.cols()); }
  int concat_count() const { return static_cast<int>(directions_.rows()); }
  double width() const { return width_; }
  std::uint64_t universe() const { return universe_; }
  const Eigen::MatrixXd& directions() const { return directions_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }
  const std::vector<std::uint64_t>& rehash_coefficients() const { return rehash_; }

  std::vector<std::int64_t> pre_bucket(const PointRef& x) const;
  std::uint64_t rehash(const std::vector<std::int64_t>& pre) const;
  std::uint64_t bucket(const PointRef& x) const { return rehash(pre_bucket(x)); }
  std::vector<std::uint64_t> buckets(const PointMatrix& xs) const;

  std::string serialize() const;
  static LshFunction deserialize(std::string_view blob);

 private:
  Eigen::MatrixXd directions_;  // concat x dim, rows are Gaussian directions
  Eigen::VectorXd offsets_;     // uniform in [0, width)
  double width_;
  std::vector<std::uint64_t> rehash_;  // concat multipliers then the additive term, all mod kPrime
  std::uint64_t universe_;
};

// Universe defaults to n^3 (capped below the rehash prime).
std::uint64_t default_universe(std::size_t n);

LshFunction sample_lsh(const LshParams& params, int dim, Rng& rng);
LshFunction sample_lsh(const LshDesign& design, double r, int dim, std::uint64_t universe, Rng& rng);

inline std::uint64_t hash_point(const LshFunction& h, const PointRef& x) { return h.bucket(x); }

// Columns z_1..z_d form a Haar-random orthonormal basis.
struct RotationBasis {
  Eigen::MatrixXd basis;
};

RotationBasis sample_rotation(int d, Rng& rng);

// 2 sqrt(ln(d m / beta) / d): with probability 1 - beta every one of m
// difference vectors projects onto every axis with at most this fraction of its length.
double projection_bound_factor(int d, std::size_t m, double beta);

// Fraction of `trials` freshly sampled functions that collide on a random pair
// at the given distance.
double measure_collision_rate(const LshDesign& design, double r, int dim, double distance, std::size_t trials,
                              Rng& rng);

}  // namespace dpc
