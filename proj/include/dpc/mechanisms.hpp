#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "dpc/budget.hpp"
#include "dpc/error.hpp"
#include "dpc/rng.hpp"

namespace dpc {

double laplace_sample(double scale, Rng& rng);

// Adds i.i.d. Lap(k/eps) per coordinate and charges (eps, 0) when a ledger is given.
template <typename Derived>
typename Derived::PlainObject laplace_mechanism(const Eigen::MatrixBase<Derived>& value, double l1_sensitivity,
                                                double epsilon, Rng& rng, PrivacyBudget* ledger = nullptr,
                                                std::string_view label = "laplace") {
  if (!(l1_sensitivity > 0.0) || !(epsilon > 0.0))
    throw PreconditionError("laplace_mechanism: sensitivity and epsilon must be positive");
  if (ledger) ledger->charge(std::string(label), epsilon, 0.0);
  typename Derived::PlainObject out = value;
  const double scale = l1_sensitivity / epsilon;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += rng.laplace(scale);
  return out;
}

double gaussian_sigma(double l2_sensitivity, double epsilon, double delta);

template <typename Derived>
typename Derived::PlainObject gaussian_mechanism(const Eigen::MatrixBase<Derived>& value, double l2_sensitivity,
                                                 double epsilon, double delta, Rng& rng,
                                                 PrivacyBudget* ledger = nullptr,
                                                 std::string_view label = "gaussian") {
  const double sigma = gaussian_sigma(l2_sensitivity, epsilon, delta);
  if (ledger) ledger->charge(std::string(label), epsilon, delta);
  typename Derived::PlainObject out = value;
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += sigma * rng.normal();
  return out;
}

// AboveThreshold. The threshold noise is drawn once at construction.
class SvtSession {
 public:
  SvtSession(double threshold, double epsilon, Rng& rng);

  // true is the top answer; the session halts after it.
  bool query(double value, Rng& rng);

  double threshold() const { return threshold_; }
  double epsilon() const { return epsilon_; }
  double noisy_threshold() const { return noisy_threshold_; }
  bool halted() const { return halted_; }
  std::size_t queries_answered() const { return answered_; }

  // (8/eps) ln(2k/beta)
  static double accuracy(double epsilon, std::size_t k, double beta);

 private:
  double threshold_;
  double epsilon_;
  double noisy_threshold_;
  bool halted_ = false;
  std::size_t answered_ = 0;
};

inline SvtSession svt_init(double threshold, double epsilon, Rng& rng) { return SvtSession(threshold, epsilon, rng); }
inline bool svt_query(SvtSession& s, double value, Rng& rng) { return s.query(value, rng); }

struct ReleasedBin {
  std::uint64_t bin;
  double noisy_count;
};

// Smallest legal t: (12/eps) ln(n/(beta delta)).
double stable_histogram_floor(std::size_t n, double epsilon, double delta, double beta);

// Releases bins whose count + Lap(2/eps) exceeds t/2, heaviest first, at most
// floor(4n/t) of them. Empty bins are never considered.
std::vector<ReleasedBin> stable_histogram(const std::map<std::uint64_t, std::size_t>& bin_counts, std::size_t n,
                                          double t, double epsilon, double delta, double beta, Rng& rng);

// argmax of count + Lap(2/eps); eps-DP for counts that change by at most one
// in two places between neighbors.
std::size_t report_noisy_max(const std::vector<double>& counts, double epsilon, Rng& rng);

// Tail bounds for |sum of n i.i.d. Lap(1/eps)| >= t: 6 exp(-eps t / sqrt(2n)),
// and 2 exp(-eps^2 t^2 / 4n) for t < 2n/eps (infinity past that range).
double laplace_sum_tail_bound(std::size_t n, double epsilon, double t);
double laplace_sum_subgaussian_bound(std::size_t n, double epsilon, double t);

}  // namespace dpc
