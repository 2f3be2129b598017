#include "dpc/rng.hpp"

#include <cmath>

#include "dpc/error.hpp"

namespace dpc {

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seq);
}

Rng Rng::split() {
  const std::uint64_t hi = engine_();
  const std::uint64_t lo = engine_();
  Rng child(0);
  std::seed_seq seq{static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32),
                    static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32)};
  child.engine_.seed(seq);
  return child;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  double u = 0.0;
  while (u == 0.0) u = uniform();
  return u;
}

double Rng::normal() { return normal_(engine_); }

double Rng::laplace(double scale) {
  if (!(scale > 0.0)) throw PreconditionError("laplace scale must be positive");
  // Inverse CDF on a symmetric uniform.
  const double u = uniform_open() - 0.5;
  const double mag = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0 ? -mag : mag;
}

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

}  // namespace dpc
