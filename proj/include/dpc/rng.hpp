#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace dpc {

// Seeded, splittable random source. Every stochastic operation takes one of
// these by reference so a run is reproducible from its seed.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed);

  // Independent child stream; advances this stream by two draws.
  Rng split();

  std::uint64_t bits() { return engine_(); }
  double uniform();                     // [0, 1)
  double uniform_open();                // (0, 1)
  double normal();                      // N(0, 1)
  double laplace(double scale);         // density exp(-|y|/scale) / (2 scale)
  std::size_t index(std::size_t n);     // uniform in [0, n)
  bool bernoulli(double p);

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace dpc
