#ifndef GRADLAB_INVARIANT_MEASURE_HPP
#define GRADLAB_INVARIANT_MEASURE_HPP

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <vector>

#include "gradlab/generator.hpp"
#include "gradlab/gradient.hpp"

namespace gradlab {

/// Node values rho >= 0 with sum_i rho_i h^d = 1.
template <typename Scalar>
struct DiscreteDensity {
  NodeValues<Scalar> values;
  Scalar cell_volume = 1;
  /// smallest node value
  Scalar floor = 0;
  /// |L_h^T rho|_inf after normalization
  Scalar stationarity_residual = 0;
  int iterations = 0;

  /// <rho, f> = sum_i rho_i f_i h^d
  Scalar pairing(const NodeValues<Scalar>& f) const { return cell_volume * values.dot(f); }
  Scalar mass() const { return cell_volume * values.sum(); }
};

struct StationaryOptions {
  double shift = 1e-8;
  double residual_tolerance = 1e-9;
  double negativity_tolerance = 1e-12;
  int max_iterations = 50;
};

/**
 * Null vector of L_h^T by shifted inverse iteration on shift I - L_h^T,
 * seeded with the uniform vector. For a monotone reflecting generator the
 * iteration matrix is an M-matrix, so iterates stay nonnegative.
 */
template <typename Scalar>
DiscreteDensity<Scalar> stationary_density(const DiscreteGenerator<Scalar>& gen,
                                           const StationaryOptions& opt = {}) {
  if (!gen.monotone || gen.boundary != BoundaryCondition::Reflecting)
    throw InvalidInput("stationary density needs a monotone generator with reflecting boundary");
  const Index n = gen.matrix.rows();
  const SparseMatrix<Scalar> lt = gen.matrix.transpose();
  SparseMatrix<Scalar> m(n, n);
  m.setIdentity();
  m = Scalar(opt.shift) * m - lt;
  m.makeCompressed();
  Eigen::SparseLU<SparseMatrix<Scalar>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw StationarityError("factorization of the shifted adjoint generator failed");

  DiscreteDensity<Scalar> rho;
  rho.cell_volume = gen.grid.cell_volume();
  NodeValues<Scalar> x = NodeValues<Scalar>::Ones(n);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    x = lu.solve(x);
    if (!x.allFinite()) throw StationarityError("inverse iteration produced non-finite values");
    x /= x.sum() * rho.cell_volume;
    rho.iterations = it;
    rho.stationarity_residual = (lt * x).cwiseAbs().maxCoeff();
    if (rho.stationarity_residual <= Scalar(opt.residual_tolerance)) break;
  }
  if (!(rho.stationarity_residual <= Scalar(opt.residual_tolerance)))
    throw StationarityError("inverse iteration did not reach the stationarity tolerance");
  const Scalar most_negative = x.minCoeff();
  if (most_negative < -Scalar(opt.negativity_tolerance))
    throw StationarityError("stationary vector has negative components");
  rho.values = x.cwiseMax(Scalar(0));
  rho.floor = rho.values.minCoeff();
  return rho;
}

template <typename Scalar>
struct DualDrift {
  /// tabulated b_hat; masked rows are NaN
  VectorField<Scalar> field;
  MatrixX<Scalar> values;
  /// nodes with rho below the positivity floor
  std::vector<Index> masked;
};

/// b_hat = 2 A grad_h(rho) / rho - b at every node with rho >= 1e-13 max(rho).
template <typename Scalar>
DualDrift<Scalar> dual_drift(const DiscreteDensity<Scalar>& rho, const DiffusionMatrix<Scalar>& a,
                             const VectorField<Scalar>& b, const Grid<Scalar>& grid,
                             Scalar relative_floor = Scalar(1e-13)) {
  if (rho.values.size() != grid.size()) throw InvalidInput("density size does not match the grid");
  const auto grad = discrete_gradient(grid, rho.values);
  const Scalar floor = relative_floor * rho.values.maxCoeff();
  DualDrift<Scalar> out;
  out.values.resize(grid.size(), grid.dimension());
  for (Index i = 0; i < grid.size(); ++i) {
    if (!(rho.values[i] >= floor) || rho.values[i] <= Scalar(0)) {
      out.masked.push_back(i);
      out.values.row(i).setConstant(std::numeric_limits<Scalar>::quiet_NaN());
      continue;
    }
    const Point<Scalar> g = grad.vectors.row(i).transpose();
    out.values.row(i) = (Scalar(2) * a.matrix() * g / rho.values[i] - b(grid.point(i))).transpose();
  }
  out.field = VectorField<Scalar>::tabulated(grid, out.values, false);
  return out;
}

/**
 * | sum_i psi_i (L phi)_i rho_i - sum_i phi_i (L_hat psi)_i rho_i | h^d
 * for phi, psi supported in the inner half-box.
 */
template <typename Scalar>
Scalar duality_residual(const DiscreteGenerator<Scalar>& gen, const DiscreteGenerator<Scalar>& dual,
                        const DiscreteDensity<Scalar>& rho, const NodeValues<std::type_identity_t<Scalar>>& phi,
                        const NodeValues<std::type_identity_t<Scalar>>& psi) {
  const auto& grid = gen.grid;
  if (phi.size() != grid.size() || psi.size() != grid.size() || dual.matrix.rows() != grid.size())
    throw InvalidInput("duality residual operands disagree in size");
  for (Index i = 0; i < grid.size(); ++i)
    if (!grid.in_inner_box(i) && (phi[i] != Scalar(0) || psi[i] != Scalar(0)))
      throw InvalidInput("duality test functions must be supported in the inner half-box");
  const NodeValues<Scalar> lphi = gen.matrix * phi;
  const NodeValues<Scalar> lpsi = dual.matrix * psi;
  const Scalar lhs = psi.cwiseProduct(lphi).dot(rho.values);
  const Scalar rhs = phi.cwiseProduct(lpsi).dot(rho.values);
  return std::abs(lhs - rhs) * grid.cell_volume();
}

}  // namespace gradlab

#endif  // GRADLAB_INVARIANT_MEASURE_HPP
