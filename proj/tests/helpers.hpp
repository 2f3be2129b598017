#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpc/core.hpp"
#include "dpc/rng.hpp"

namespace dpc::testing {

inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, std::int64_t side) {
  const int d = rows.empty() ? 1 : static_cast<int>(rows.front().size());
  PointMatrix m(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (int i = 0; i < d; ++i) m(i, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(i)];
  return Dataset(std::move(m), GridSpec{d, side});
}

inline Point vec(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

inline Dataset random_grid_dataset(std::size_t n, int d, std::int64_t side, Rng& rng) {
  PointMatrix m(d, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (int i = 0; i < d; ++i)
      m(i, j) = static_cast<double>(rng.index(static_cast<std::size_t>(side))) / static_cast<double>(side - 1);
  return Dataset(std::move(m), GridSpec{d, side});
}

// Smallest radius reaching t points from any grid center (pitch = grid step).
inline double grid_search_radius(const Dataset& s, std::size_t t) {
  const int d = s.dim();
  const auto side = static_cast<std::size_t>(s.grid().side);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  double best = INFINITY;
  std::vector<double> dist(s.size());
  Point c(d);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    for (int i = 0; i < d; ++i) {
      c(i) = static_cast<double>(rest % side) * s.grid().step();
      rest /= side;
    }
    for (std::size_t j = 0; j < s.size(); ++j) dist[j] = (s.point(j) - c).norm();
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(t - 1), dist.end());
    best = std::min(best, dist[t - 1]);
  }
  return best;
}

// Fraction with a one-sided three-standard-error allowance.
inline double three_se(double p, std::size_t n) { return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace dpc::testing
