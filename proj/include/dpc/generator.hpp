#pragma once

#include <vector>

#include "dpc/core.hpp"
#include "dpc/rng.hpp"

namespace dpc {

struct ClusterSpec {
  Point center;
  double radius = 0.0;
  std::size_t size = 0;
};

// Clusters are filled uniformly within their balls; the remaining
// n - sum(sizes) points are uniform on the grid.
struct PlantedConfig {
  GridSpec grid;
  std::size_t n = 0;
  std::vector<ClusterSpec> clusters;
};

// Uniform in the ball, snapped to the grid, resampled until the snapped point
// stays inside the ball.
Point sample_grid_point_in_ball(const GridSpec& grid, const Point& center, double radius, Rng& rng);

// Random cluster centers kept radius away from the cube faces.
PlantedConfig random_planted_config(const GridSpec& grid, std::size_t n, std::size_t clusters,
                                    std::size_t cluster_size, double radius, Rng& rng);

// Rows are shuffled so cluster membership is not positional.
Dataset generate_planted(const PlantedConfig& config, Rng& rng);

}  // namespace dpc
