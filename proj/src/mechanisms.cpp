#include "dpc/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpc {

double laplace_sample(double scale, Rng& rng) { return rng.laplace(scale); }

double gaussian_sigma(double l2_sensitivity, double epsilon, double delta) {
  if (!(l2_sensitivity > 0.0)) throw PreconditionError("gaussian: sensitivity must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw PreconditionError("gaussian: epsilon must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("gaussian: delta must lie in (0, 1)");
  return l2_sensitivity / epsilon * std::sqrt(2.0 * std::log(1.25 / delta));
}

SvtSession::SvtSession(double threshold, double epsilon, Rng& rng) : threshold_(threshold), epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("svt: epsilon must be positive");
  noisy_threshold_ = threshold + rng.laplace(2.0 / epsilon);
}

bool SvtSession::query(double value, Rng& rng) {
  if (halted_) throw PreconditionError("svt: session already halted");
  ++answered_;
  if (value + rng.laplace(4.0 / epsilon_) >= noisy_threshold_) {
    halted_ = true;
    return true;
  }
  return false;
}

double SvtSession::accuracy(double epsilon, std::size_t k, double beta) {
  return 8.0 / epsilon * std::log(2.0 * static_cast<double>(k) / beta);
}

double stable_histogram_floor(std::size_t n, double epsilon, double delta, double beta) {
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(beta > 0.0 && beta < 1.0))
    throw PreconditionError("stable_histogram: invalid (epsilon, delta, beta)");
  return 12.0 / epsilon * std::log(static_cast<double>(std::max<std::size_t>(n, 1)) / (beta * delta));
}

std::vector<ReleasedBin> stable_histogram(const std::map<std::uint64_t, std::size_t>& bin_counts, std::size_t n,
                                          double t, double epsilon, double delta, double beta, Rng& rng) {
  const double floor = stable_histogram_floor(n, epsilon, delta, beta);
  if (t < floor)
    throw PreconditionError("stable_histogram: t=" + std::to_string(t) + " is below the floor " +
                            std::to_string(floor));
  const double tau = t / 2.0;
  // The stability argument needs tau - 1 >= (2/eps) ln(2/delta).
  if (tau - 1.0 < 2.0 / epsilon * std::log(2.0 / delta))
    throw PreconditionError("stable_histogram: release threshold too small for (epsilon, delta)");
  std::vector<ReleasedBin> out;
  for (const auto& [bin, count] : bin_counts) {
    if (count == 0) continue;
    const double noisy = static_cast<double>(count) + rng.laplace(2.0 / epsilon);
    if (noisy > tau) out.push_back({bin, noisy});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.noisy_count > b.noisy_count; });
  const auto cap = static_cast<std::size_t>(std::floor(4.0 * static_cast<double>(n) / t));
  if (out.size() > cap) out.resize(cap);
  return out;
}

std::size_t report_noisy_max(const std::vector<double>& counts, double epsilon, Rng& rng) {
  if (counts.empty()) throw PreconditionError("report_noisy_max: no candidates");
  if (!(epsilon > 0.0)) throw PreconditionError("report_noisy_max: epsilon must be positive");
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double v = counts[i] + rng.laplace(2.0 / epsilon);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

double laplace_sum_tail_bound(std::size_t n, double epsilon, double t) {
  return 6.0 * std::exp(-epsilon * t / std::sqrt(2.0 * static_cast<double>(n)));
}

double laplace_sum_subgaussian_bound(std::size_t n, double epsilon, double t) {
  const double nd = static_cast<double>(n);
  if (t >= 2.0 * nd / epsilon) return std::numeric_limits<double>::infinity();
  return 2.0 * std::exp(-epsilon * epsilon * t * t / (4.0 * nd));
}

}  // namespace dpc
