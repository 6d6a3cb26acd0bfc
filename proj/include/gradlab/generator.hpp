#ifndef GRADLAB_GENERATOR_HPP
#define GRADLAB_GENERATOR_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradlab/drift.hpp"
#include "gradlab/errors.hpp"
#include "gradlab/grid.hpp"

namespace gradlab {

template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

/**
 * Constant symmetric strictly positive definite diffusion matrix A.
 * Symmetry is required exactly as stored.
 */
template <typename Scalar>
class DiffusionMatrix {
 public:
  DiffusionMatrix() = default;

  explicit DiffusionMatrix(const MatrixX<Scalar>& a) : a_(a) {
    if (a.rows() != a.cols() || a.rows() < 1 || a.rows() > 3)
      throw InvalidInput("diffusion matrix must be square with dimension 1..3");
    if (!a.allFinite()) throw InvalidInput("diffusion matrix has non-finite entries");
    if (a != a.transpose()) throw InvalidInput("diffusion matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(a, Eigen::EigenvaluesOnly);
    min_eig_ = es.eigenvalues().minCoeff();
    max_eig_ = es.eigenvalues().maxCoeff();
    if (!(min_eig_ > Scalar(0)))
      throw InvalidInput("diffusion matrix must be strictly positive definite");
  }

  static DiffusionMatrix identity(int d) {
    return DiffusionMatrix(MatrixX<Scalar>::Identity(d, d));
  }

  const MatrixX<Scalar>& matrix() const { return a_; }
  int dimension() const { return static_cast<int>(a_.rows()); }
  Scalar min_eigenvalue() const { return min_eig_; }
  Scalar max_eigenvalue() const { return max_eig_; }
  bool is_diagonal() const { return a_.isDiagonal(Scalar(0)); }

  /// |A| + |A^{-1}| in the spectral norm.
  Scalar bound() const { return max_eig_ + Scalar(1) / min_eig_; }

 private:
  MatrixX<Scalar> a_ = MatrixX<Scalar>::Identity(1, 1);
  Scalar min_eig_ = 1;
  Scalar max_eig_ = 1;
};

/// max_k (|A_k| + |A_k^{-1}|) over a piecewise-constant schedule.
template <typename Scalar>
Scalar uniform_bound(const std::vector<DiffusionMatrix<Scalar>>& schedule) {
  if (schedule.empty()) throw InvalidInput("empty diffusion schedule");
  Scalar m(0);
  for (const auto& a : schedule) m = std::max(m, a.bound());
  return m;
}

enum class BoundaryCondition { Reflecting, Absorbing };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Reflecting ? "reflecting" : "absorbing";
}

/**
 * Sparse discrete generator L_h. Reflecting rows sum to zero; absorbing
 * boundary rows are zero, so the boundary values are frozen and the
 * implicit step matrix I - tau L_h is the identity there.
 */
template <typename Scalar>
struct DiscreteGenerator {
  Grid<Scalar> grid;
  SparseMatrix<Scalar> matrix;
  BoundaryCondition boundary = BoundaryCondition::Reflecting;
  /// true iff every off-diagonal entry is >= 0
  bool monotone = false;
};

/// Direct scan: every off-diagonal entry >= 0.
template <typename Scalar>
bool off_diagonal_nonnegative(const SparseMatrix<Scalar>& m) {
  for (Index k = 0; k < m.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(m, k); it; ++it)
      if (it.row() != it.col() && it.value() < Scalar(0)) return false;
  return true;
}

/**
 * Finite-difference discretization of
 *   L u = sum_ij a_ij d_i d_j u + sum_i b_i d_i u
 * with central second differences, the 4-point cross stencil for i != j,
 * first-order upwind drift and mirror ghost nodes at the boundary.
 */
template <typename Scalar>
DiscreteGenerator<Scalar> assemble_generator(const Grid<Scalar>& grid,
                                             const DiffusionMatrix<Scalar>& a,
                                             const VectorField<Scalar>& drift,
                                             BoundaryCondition bc = BoundaryCondition::Reflecting) {
  const int d = grid.dimension();
  if (a.dimension() != d || drift.dimension() != d)
    throw InvalidInput("diffusion/drift dimension does not match the grid");
  const Scalar h = grid.spacing();
  const Scalar h2 = h * h;
  const MatrixX<Scalar>& am = a.matrix();

  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.size()) * (3 * d + 4 * d * (d - 1) / 2 + 1));
  for (Index i = 0; i < grid.size(); ++i) {
    if (bc == BoundaryCondition::Absorbing && grid.is_boundary(i)) continue;
    const Point<Scalar> x = grid.point(i);
    Point<Scalar> b;
    try {
      b = drift(x);
    } catch (const DomainError& e) {
      throw DomainError(std::string("drift not evaluable at a grid node: ") + e.what());
    }
    if (b.size() != d || !b.allFinite()) {
      std::ostringstream os;
      os << "drift not evaluable at node " << i << " (x = " << x.transpose() << ")";
      throw DomainError(os.str());
    }
    Scalar diag(0);
    for (int k = 0; k < d; ++k) {
      const Scalar c = am(k, k) / h2;
      triplets.emplace_back(i, grid.shifted(i, k, +1), c);
      triplets.emplace_back(i, grid.shifted(i, k, -1), c);
      diag -= Scalar(2) * c;
      if (b[k] > Scalar(0)) {
        triplets.emplace_back(i, grid.shifted(i, k, +1), b[k] / h);
        diag -= b[k] / h;
      } else if (b[k] < Scalar(0)) {
        triplets.emplace_back(i, grid.shifted(i, k, -1), -b[k] / h);
        diag += b[k] / h;
      }
      for (int l = k + 1; l < d; ++l) {
        const Scalar c2 = am(k, l) / (Scalar(2) * h2);
        if (c2 == Scalar(0)) continue;
        for (int sk : {-1, 1})
          for (int sl : {-1, 1})
            triplets.emplace_back(i, grid.shifted(grid.shifted(i, k, sk), l, sl),
                                  Scalar(sk * sl) * c2);
      }
    }
    triplets.emplace_back(i, i, diag);
  }
  DiscreteGenerator<Scalar> gen;
  gen.grid = grid;
  gen.boundary = bc;
  gen.matrix.resize(grid.size(), grid.size());
  gen.matrix.setFromTriplets(triplets.begin(), triplets.end());
  gen.matrix.makeCompressed();
  gen.monotone = off_diagonal_nonnegative(gen.matrix);
  return gen;
}

/// Writes `node_i,node_j,value` lines with a header row.
template <typename Scalar>
void write_coo(std::ostream& os, const SparseMatrix<Scalar>& m) {
  os << "node_i,node_j,value\n";
  os.precision(std::numeric_limits<Scalar>::max_digits10);
  std::vector<Eigen::Triplet<Scalar>> entries;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(m, k); it; ++it)
      entries.emplace_back(it.row(), it.col(), it.value());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  for (const auto& e : entries) os << e.row() << ',' << e.col() << ',' << e.value() << '\n';
}

template <typename Scalar>
SparseMatrix<Scalar> read_coo(std::istream& is, Index rows, Index cols) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("empty COO stream");
  std::vector<Eigen::Triplet<Scalar>> entries;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Index r, c;
    long double v;
    char comma1, comma2;
    if (!(ls >> r >> comma1 >> c >> comma2 >> v) || comma1 != ',' || comma2 != ',')
      throw InvalidInput("malformed COO line: " + line);
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw InvalidInput("COO index out of range: " + line);
    entries.emplace_back(r, c, static_cast<Scalar>(v));
  }
  SparseMatrix<Scalar> m(rows, cols);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

}  // namespace gradlab

#endif  // GRADLAB_GENERATOR_HPP
