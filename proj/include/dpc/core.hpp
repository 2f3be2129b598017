#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dpc/budget.hpp"
#include "dpc/error.hpp"

namespace dpc {

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Point = VectorT<double>;
using PointMatrix = MatrixT<double>;  // one point per column
using PointRef = Eigen::Ref<const Point>;

// Predicate marking points to leave out of a count (true = excluded).
using PointFilter = std::function<bool(const PointRef&)>;

// The grid X^d: coordinates are multiples of 1/(side-1) in [0, 1].
struct GridSpec {
  int dimension = 1;
  std::int64_t side = 2;

  double step() const { return 1.0 / static_cast<double>(side - 1); }
  void validate() const;

  template <typename Derived>
  bool on_grid(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dimension) return false;
    const double s = static_cast<double>(side - 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = static_cast<double>(x(i));
      if (v < 0.0 || v > 1.0) return false;
      if (std::abs(v * s - std::round(v * s)) > 1e-9 * std::max(1.0, s)) return false;
    }
    return true;
  }

  Point snap(const Point& x) const;
};

class Dataset {
 public:
  Dataset() = default;
  // Throws PreconditionError if a column is off the grid or has the wrong size.
  Dataset(PointMatrix points, GridSpec grid);

  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  int dim() const { return grid_.dimension; }
  const GridSpec& grid() const { return grid_; }
  const PointMatrix& points() const { return points_; }
  auto point(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }

  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Neighboring dataset: entry i replaced.
  Dataset with_replaced(std::size_t i, const Point& x) const;

 private:
  PointMatrix points_;
  GridSpec grid_;
};

struct Ball {
  Point center;
  double radius = 0.0;
};

struct Solution {
  Ball ball;
  std::size_t covered = 0;     // max(0, round(noisy_count)), capped at n
  double noisy_count = 0.0;
  double coverage_slack = 0.0;  // the Delta the solver vouches for
  int radius_index = -1;
  bool fallback = false;
  PrivacyBudget budget_spent;
  std::string diagnostic;
  std::map<std::string, double> diagnostics;
};

template <typename A, typename B>
typename A::Scalar distance(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  if (p.size() != q.size()) throw PreconditionError("distance: dimension mismatch");
  return (p - q).norm();
}

// Closed ball: boundary points count as inside.
std::size_t count_in_ball(const Dataset& s, const Ball& b, const PointFilter& excluded = {});

// Smallest ball centered at a data point covering at least t points.
// Within a factor 2 of the optimum. Ties go to the lowest point index.
Ball oracle_min_ball(const Dataset& s, std::size_t t);

// CSV with a "# grid |X|=<side> d=<d>" line and an x0,...,x{d-1} header.
void write_dataset_csv(std::ostream& out, const Dataset& s);
Dataset read_dataset_csv(std::istream& in);

}  // namespace dpc
