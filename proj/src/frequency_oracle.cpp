#include <algorithm>
#include <bit>
#include <cmath>

#include "dpc/local.hpp"

namespace dpc {

std::uint64_t hadamard_universe(std::uint64_t size) { return std::bit_ceil(std::max<std::uint64_t>(size, 1)); }

Message hadamard_encode(std::uint64_t value, std::uint64_t universe, double epsilon, Rng& rng) {
  if (!std::has_single_bit(universe)) throw PreconditionError("hadamard: universe must be a power of two");
  if (value >= universe) throw PreconditionError("hadamard: value outside the universe");
  const std::uint64_t row = rng.bits() & (universe - 1);
  const double truth = (std::popcount(row & value) & 1) ? -1.0 : 1.0;
  const double bit = rng.bernoulli(rr_keep_probability(epsilon)) ? truth : -truth;
  return {Message::Kind::IndexedBit, row, bit};
}

HadamardAggregator::HadamardAggregator(std::uint64_t universe, double epsilon) : universe_(universe) {
  if (!std::has_single_bit(universe)) throw PreconditionError("hadamard: universe must be a power of two");
  if (!(epsilon > 0.0)) throw PreconditionError("hadamard: epsilon must be positive");
  scale_ = 1.0 / std::tanh(epsilon / 2.0);
}

void HadamardAggregator::add(const Message& m) {
  rows_.push_back(m.index);
  bits_.push_back(m.value > 0 ? 1 : -1);
}

double HadamardAggregator::estimate(std::uint64_t v) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < rows_.size(); ++j)
    acc += (std::popcount(rows_[j] & v) & 1) ? -bits_[j] : bits_[j];
  return scale_ * acc;
}

std::vector<double> HadamardAggregator::estimate_all() const {
  if (universe_ > kMaxEnumerable)
    throw PreconditionError("hadamard: universe of " + std::to_string(universe_) +
                            " exceeds 2^20; compress the values first");
  std::vector<double> w(universe_, 0.0);
  for (std::size_t j = 0; j < rows_.size(); ++j) w[rows_[j]] += bits_[j];
  for (std::uint64_t len = 1; len < universe_; len <<= 1)
    for (std::uint64_t i = 0; i < universe_; i += len << 1)
      for (std::uint64_t k = i; k < i + len; ++k) {
        const double a = w[k], b = w[k + len];
        w[k] = a + b;
        w[k + len] = a - b;
      }
  for (auto& x : w) x *= scale_;
  return w;
}

double HadamardAggregator::error_bound(double beta) const {
  return scale_ * std::sqrt(2.0 * static_cast<double>(rows_.size()) *
                            std::log(2.0 * static_cast<double>(universe_) / beta));
}

std::vector<HeavyHitter> ldp_histogram(std::span<const std::uint64_t> values, std::uint64_t universe,
                                       double epsilon, double beta, Rng& rng) {
  const std::uint64_t u = hadamard_universe(universe);
  if (u > HadamardAggregator::kMaxEnumerable)
    throw PreconditionError("ldp_histogram: universe exceeds 2^20; compress the values first");
  HadamardAggregator agg(u, epsilon);
  for (auto v : values) agg.add(hadamard_encode(v, u, epsilon, rng));
  const auto est = agg.estimate_all();
  const double tau = agg.error_bound(beta);
  std::vector<HeavyHitter> out;
  for (std::uint64_t v = 0; v < u; ++v)
    if (est[v] >= tau) out.push_back({v, est[v]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.estimate > b.estimate; });
  const auto cap = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(values.size()))));
  if (out.size() > cap) out.resize(cap);
  return out;
}

}  // namespace dpc
