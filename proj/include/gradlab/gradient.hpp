#ifndef GRADLAB_GRADIENT_HPP
#define GRADLAB_GRADIENT_HPP

#include "gradlab/drift.hpp"
#include "gradlab/grid.hpp"

namespace gradlab {

template <typename Scalar>
struct GradientField {
  /// one row per node, one column per axis
  MatrixX<Scalar> vectors;
  /// node-wise Euclidean norm of `vectors`
  NodeValues<Scalar> norm;
};

/// Central differences in the interior, one-sided differences on boundary layers.
template <typename Scalar>
GradientField<Scalar> discrete_gradient(const Grid<Scalar>& grid, const NodeValues<std::type_identity_t<Scalar>>& u) {
  if (u.size() != grid.size()) throw InvalidInput("node value count does not match the grid");
  const int d = grid.dimension();
  const Index n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  GradientField<Scalar> g;
  g.vectors.resize(grid.size(), d);
  for (Index i = 0; i < grid.size(); ++i) {
    const auto idx = grid.multi_index(i);
    for (int k = 0; k < d; ++k) {
      if (idx[k] == 0)
        g.vectors(i, k) = (u[grid.shifted(i, k, 1)] - u[i]) / h;
      else if (idx[k] == n - 1)
        g.vectors(i, k) = (u[i] - u[grid.shifted(i, k, -1)]) / h;
      else
        g.vectors(i, k) = (u[grid.shifted(i, k, 1)] - u[grid.shifted(i, k, -1)]) / (Scalar(2) * h);
    }
  }
  g.norm = g.vectors.rowwise().norm();
  return g;
}

}  // namespace gradlab

#endif  // GRADLAB_GRADIENT_HPP
