#ifndef GRADLAB_GRID_HPP
#define GRADLAB_GRID_HPP

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <string>
#include <type_traits>

#include "gradlab/errors.hpp"

namespace gradlab {

using Index = Eigen::Index;

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using NodeValues = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/**
 * Uniform tensor grid on the box [-R, R]^d, d <= 3, with an odd number of
 * points per axis so that the origin is a node.
 *
 * Nodes are numbered row-major: the last axis varies fastest, i.e.
 *   node = ((i_0 * n) + i_1) * n + i_2    (d = 3)
 */
template <typename Scalar>
class Grid {
 public:
  using MultiIndex = std::array<Index, 3>;

  Grid() = default;

  Grid(int dimension, Scalar radius, Index points)
      : dimension_(dimension), radius_(radius), points_(points) {
    if (dimension < 1 || dimension > 3)
      throw InvalidInput("grid dimension must be 1, 2 or 3, got " + std::to_string(dimension));
    if (!(radius > Scalar(0)) || !std::isfinite(static_cast<double>(radius)))
      throw InvalidInput("grid radius must be positive");
    if (points < 3 || points % 2 == 0)
      throw InvalidInput("grid points per axis must be odd and >= 3, got " +
                         std::to_string(points));
    spacing_ = Scalar(2) * radius / Scalar(points - 1);
    size_ = 1;
    for (int k = 0; k < dimension; ++k) size_ *= points;
  }

  int dimension() const { return dimension_; }
  Scalar radius() const { return radius_; }
  Index points_per_axis() const { return points_; }
  Scalar spacing() const { return spacing_; }
  Index size() const { return size_; }

  /// h^d, the quadrature weight of one node.
  Scalar cell_volume() const {
    Scalar v(1);
    for (int k = 0; k < dimension_; ++k) v *= spacing_;
    return v;
  }

  /// Coordinate of axis index i; exact at -R, 0 and R.
  Scalar coordinate(Index i) const {
    if (i == 0) return -radius_;
    if (i == points_ - 1) return radius_;
    return Scalar(i - (points_ - 1) / 2) * spacing_;
  }

  MultiIndex multi_index(Index node) const {
    MultiIndex idx{0, 0, 0};
    for (int k = dimension_ - 1; k >= 0; --k) {
      idx[k] = node % points_;
      node /= points_;
    }
    return idx;
  }

  Index node(const MultiIndex& idx) const {
    Index n = 0;
    for (int k = 0; k < dimension_; ++k) n = n * points_ + idx[k];
    return n;
  }

  Point<Scalar> point(Index node) const {
    const auto idx = multi_index(node);
    Point<Scalar> x(dimension_);
    for (int k = 0; k < dimension_; ++k) x[k] = coordinate(idx[k]);
    return x;
  }

  bool is_boundary(Index node) const {
    const auto idx = multi_index(node);
    for (int k = 0; k < dimension_; ++k)
      if (idx[k] == 0 || idx[k] == points_ - 1) return true;
    return false;
  }

  /// True iff every coordinate satisfies |x_k| <= R/2 (the reporting region).
  bool in_inner_box(Index node) const {
    const auto idx = multi_index(node);
    const Index center = (points_ - 1) / 2;
    const Index half = (points_ - 1) / 4;
    for (int k = 0; k < dimension_; ++k)
      if (std::abs(idx[k] - center) > half) return false;
    return true;
  }

  /// Axis index i + offset, mirrored back into [0, n-1] (ghost node reflection).
  Index mirror(Index i) const {
    if (i < 0) return -i;
    if (i > points_ - 1) return 2 * (points_ - 1) - i;
    return i;
  }

  /// Node shifted by `offset` along `axis`, mirrored at the boundary.
  Index shifted(Index node, int axis, Index offset) const {
    auto idx = multi_index(node);
    idx[axis] = mirror(idx[axis] + offset);
    return this->node(idx);
  }

  /// Tabulates a scalar function at every node.
  template <typename F>
  NodeValues<Scalar> sample(F&& f) const {
    NodeValues<Scalar> v(size_);
    for (Index i = 0; i < size_; ++i) v[i] = f(point(i));
    return v;
  }

  /// Grid with the same box and half the spacing.
  Grid refined() const { return Grid(dimension_, radius_, 2 * points_ - 1); }

 private:
  int dimension_ = 1;
  Scalar radius_ = Scalar(1);
  Index points_ = 3;
  Scalar spacing_ = Scalar(1);
  Index size_ = 3;
};

template <typename Scalar>
Grid<Scalar> build_grid(int dimension, Scalar radius, Index points) {
  return Grid<Scalar>(dimension, radius, points);
}

}  // namespace gradlab

#endif  // GRADLAB_GRID_HPP
