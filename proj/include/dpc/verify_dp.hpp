#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpc/rng.hpp"

namespace dpc {

struct DpCheck {
  enum class Kind { Analytic, Empirical };
  std::string name;
  Kind kind = Kind::Empirical;
  double epsilon = 0.0;
  double delta = 0.0;
  std::size_t trials = 0;
  // Analytic: largest log-ratio minus epsilon (or the computed delta for
  // Gaussian). Empirical: largest excess in standard errors.
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::size_t trials = 100000;
  double epsilon = 1.0;
  double gaussian_epsilon = 0.5;
  double delta = 1e-5;
  std::uint64_t seed = 1;
  bool inject_broken = false;  // adds a Laplace count with half the required noise
};

// Maps one run of a mechanism on a fixed input to a discrete outcome in [0, bins).
using OutcomeSampler = std::function<std::size_t(Rng&)>;

// Two-sample test of Pr[M(S) = o] <= e^eps Pr[M(S') = o] + delta in both
// directions for every outcome, flagging excess beyond `z` standard errors.
DpCheck empirical_dp_check(std::string name, const OutcomeSampler& on_s, const OutcomeSampler& on_s_prime,
                           std::size_t bins, double epsilon, double delta, std::size_t trials, Rng& rng,
                           double z = 3.0);

// Bins a real output into `bins` cells of width `width` starting at `low`,
// with the first and last cells open-ended.
std::size_t bin_real(double value, double low, double width, std::size_t bins);

std::vector<DpCheck> verify_dp(const VerifyOptions& options);

}  // namespace dpc
