#include "dpc/core.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <regex>
#include <sstream>

namespace dpc {

void GridSpec::validate() const {
  if (dimension < 1) throw PreconditionError("grid dimension must be positive");
  if (side < 2) throw PreconditionError("grid side cardinality must be at least 2");
}

Point GridSpec::snap(const Point& x) const {
  const double s = static_cast<double>(side - 1);
  return x.unaryExpr([s](double v) { return std::clamp(std::round(v * s), 0.0, s) / s; });
}

Dataset::Dataset(PointMatrix points, GridSpec grid) : points_(std::move(points)), grid_(grid) {
  grid_.validate();
  if (points_.cols() > 0 && points_.rows() != grid_.dimension)
    throw PreconditionError("dataset rows do not match grid dimension");
  if (points_.cols() == 0) points_.resize(grid_.dimension, 0);
  for (Eigen::Index j = 0; j < points_.cols(); ++j)
    if (!grid_.on_grid(points_.col(j)))
      throw PreconditionError("dataset point " + std::to_string(j) + " is off the grid");
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  PointMatrix m(points_.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = point(indices[j]);
  Dataset out;
  out.points_ = std::move(m);
  out.grid_ = grid_;
  return out;
}

Dataset Dataset::with_replaced(std::size_t i, const Point& x) const {
  if (!grid_.on_grid(x)) throw PreconditionError("replacement point is off the grid");
  Dataset out = *this;
  out.points_.col(static_cast<Eigen::Index>(i)) = x;
  return out;
}

std::size_t count_in_ball(const Dataset& s, const Ball& b, const PointFilter& excluded) {
  if (s.size() == 0) return 0;
  if (b.center.size() != s.dim()) throw PreconditionError("count_in_ball: dimension mismatch");
  const Eigen::VectorXd d2 = (s.points().colwise() - b.center).colwise().squaredNorm().transpose();
  std::size_t count = 0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    if (std::sqrt(d2(j)) > b.radius) continue;
    if (excluded && excluded(s.points().col(j))) continue;
    ++count;
  }
  return count;
}

Ball oracle_min_ball(const Dataset& s, std::size_t t) {
  const std::size_t n = s.size();
  if (t == 0) throw PreconditionError("oracle_min_ball: t must be positive");
  if (t > n) throw PreconditionError("oracle_min_ball: t exceeds n");
  const auto& pts = s.points();
  const int d = s.dim();

  // Per-axis sorted orders: any point within R of a candidate lies in the
  // candidate's width-2R slab on every axis, so the narrowest slab bounds the
  // search.
  std::vector<std::vector<std::size_t>> order(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    auto& o = order[static_cast<std::size_t>(a)];
    o.resize(n);
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::size_t x, std::size_t y) { return pts(a, x) < pts(a, y); });
    auto& v = vals[static_cast<std::size_t>(a)];
    v.resize(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = pts(a, o[k]);
  }

  double best = std::numeric_limits<double>::infinity();  // squared radius
  std::size_t best_i = 0;
  std::vector<double> d2;
  d2.reserve(n);
  const auto consider = [&](std::size_t i, double bound) {
    const auto x = pts.col(static_cast<Eigen::Index>(i));
    const double r = std::sqrt(bound);
    std::size_t axis = 0, lo = 0, hi = n;
    if (std::isfinite(r)) {
      for (int a = 0; a < d; ++a) {
        const auto& v = vals[static_cast<std::size_t>(a)];
        const auto l = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x(a) - r) - v.begin());
        const auto h = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x(a) + r) - v.begin());
        if (h - l < hi - lo) {
          axis = static_cast<std::size_t>(a);
          lo = l;
          hi = h;
        }
      }
    }
    if (hi - lo < t) return;
    d2.clear();
    for (std::size_t k = lo; k < hi; ++k) {
      const double q = (pts.col(static_cast<Eigen::Index>(order[axis][k])) - x).squaredNorm();
      if (q <= bound) d2.push_back(q);
    }
    if (d2.size() < t) return;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(t - 1), d2.end());
    const double v = d2[t - 1];
    if (v < best || (v == best && i < best_i)) {
      best = v;
      best_i = i;
    }
  };

  const std::size_t seeds = std::min<std::size_t>(n, 32);
  for (std::size_t k = 0; k < seeds; ++k) consider(k * n / seeds, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) consider(i, best * (1.0 + 1e-12) + 1e-300);
  return {s.point(best_i), std::sqrt(best)};
}

void write_dataset_csv(std::ostream& out, const Dataset& s) {
  out << "# grid |X|=" << s.grid().side << " d=" << s.dim() << "\n";
  for (int i = 0; i < s.dim(); ++i) out << (i ? "," : "") << "x" << i;
  out << "\n";
  char buf[40];
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (int i = 0; i < s.dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.point(j)(i));
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

Dataset read_dataset_csv(std::istream& in) {
  static const std::regex grid_line(R"(#\s*grid\s*\|X\|=(\d+)\s+d=(\d+)\s*)");
  GridSpec grid{0, 0};
  bool have_grid = false, have_header = false;
  std::vector<double> values;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::smatch m;
    if (line[0] == '#') {
      if (std::regex_match(line, m, grid_line)) {
        grid.side = std::stoll(m[1]);
        grid.dimension = std::stoi(m[2]);
        have_grid = true;
      }
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    if (!have_grid) throw PreconditionError("dataset CSV lacks the '# grid' line");
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) throw PreconditionError("dataset CSV: bad number '" + cell + "'");
      values.push_back(v);
      ++cols;
    }
    if (cols != grid.dimension)
      throw PreconditionError("dataset CSV: row " + std::to_string(rows) + " has " + std::to_string(cols) +
                              " columns, expected " + std::to_string(grid.dimension));
    ++rows;
  }
  if (!have_grid) throw PreconditionError("dataset CSV lacks the '# grid' line");
  PointMatrix m = Eigen::Map<PointMatrix>(values.data(), grid.dimension, static_cast<Eigen::Index>(rows));
  return Dataset(std::move(m), grid);
}

}  // namespace dpc
