#include "dpc/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpc {

Point sample_grid_point_in_ball(const GridSpec& grid, const Point& center, double radius, Rng& rng) {
  const int d = grid.dimension;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Point dir(d);
    for (int i = 0; i < d; ++i) dir(i) = rng.normal();
    const double len = radius * std::pow(rng.uniform(), 1.0 / d);
    const Point x = grid.snap(center + len * dir.normalized());
    if ((x - center).norm() <= radius) return x;
  }
  return grid.snap(center);
}

PlantedConfig random_planted_config(const GridSpec& grid, std::size_t n, std::size_t clusters,
                                    std::size_t cluster_size, double radius, Rng& rng) {
  grid.validate();
  if (clusters * cluster_size > n) throw PreconditionError("planted config: clusters exceed n");
  PlantedConfig cfg{grid, n, {}};
  const double margin = std::min(radius, 0.5);
  for (std::size_t k = 0; k < clusters; ++k) {
    Point c(grid.dimension);
    for (int i = 0; i < grid.dimension; ++i) c(i) = margin + (1.0 - 2.0 * margin) * rng.uniform();
    cfg.clusters.push_back({grid.snap(c), radius, cluster_size});
  }
  return cfg;
}

Dataset generate_planted(const PlantedConfig& config, Rng& rng) {
  const GridSpec& g = config.grid;
  g.validate();
  std::size_t planted = 0;
  for (const auto& c : config.clusters) {
    if (c.center.size() != g.dimension) throw PreconditionError("planted config: center dimension mismatch");
    planted += c.size;
  }
  if (planted > config.n) throw PreconditionError("planted config: clusters exceed n");
  PointMatrix m(g.dimension, static_cast<Eigen::Index>(config.n));
  Eigen::Index col = 0;
  for (const auto& c : config.clusters) {
    const Point center = g.snap(c.center);
    for (std::size_t j = 0; j < c.size; ++j) m.col(col++) = sample_grid_point_in_ball(g, center, c.radius, rng);
  }
  const auto s = static_cast<double>(g.side);
  while (col < m.cols()) {
    Point x(g.dimension);
    for (int i = 0; i < g.dimension; ++i)
      x(i) = std::floor(rng.uniform() * s) / (s - 1.0);
    m.col(col++) = x;
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  PointMatrix shuffled(m.rows(), m.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) shuffled.col(static_cast<Eigen::Index>(j)) = m.col(perm[j]);
  return Dataset(std::move(shuffled), g);
}

}  // namespace dpc
