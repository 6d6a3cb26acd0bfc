#ifndef GRADLAB_SOLVER_HPP
#define GRADLAB_SOLVER_HPP

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <chrono>
#include <functional>
#include <limits>
#include <memory>

#include "gradlab/generator.hpp"

namespace gradlab {

enum class SolverKind { Direct, Iterative };

inline const char* to_string(SolverKind k) { return k == SolverKind::Direct ? "direct" : "iterative"; }

struct SolverOptions {
  /// relative residual target
  double tolerance = 1e-10;
  /// unknown count up to which a sparse LU factorization is used
  Index direct_limit = 40000;
  int max_iterations = 20000;
};

struct SolveReport {
  double residual = 0;
  int iterations = 0;
  double wall_seconds = 0;
  SolverKind solver = SolverKind::Direct;
};

/**
 * Factorization of M = sigma I - scale L, reused across right-hand sides.
 * Immutable once built; copies share the factorization.
 */
template <typename Scalar>
class ShiftedSolver {
 public:
  using Vector = NodeValues<Scalar>;

  ShiftedSolver(const SparseMatrix<Scalar>& l, Scalar sigma, Scalar scale,
                const SolverOptions& opt = {})
      : opt_(opt) {
    SparseMatrix<Scalar> id(l.rows(), l.cols());
    id.setIdentity();
    m_ = std::make_shared<SparseMatrix<Scalar>>(sigma * id - scale * l);
    m_->makeCompressed();
    if (m_->rows() <= opt.direct_limit) {
      kind_ = SolverKind::Direct;
      lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix<Scalar>>>();
      lu_->analyzePattern(*m_);
      lu_->factorize(*m_);
      if (lu_->info() != Eigen::Success)
        throw SolverError("sparse LU factorization failed: " + lu_->lastErrorMessage());
    } else {
      kind_ = SolverKind::Iterative;
      krylov_ = std::make_shared<Krylov>();
      krylov_->setTolerance(Scalar(opt.tolerance));
      krylov_->setMaxIterations(opt.max_iterations);
      krylov_->compute(*m_);
      if (krylov_->info() != Eigen::Success) throw SolverError("preconditioner setup failed");
    }
  }

  const SparseMatrix<Scalar>& matrix() const { return *m_; }
  SolverKind kind() const { return kind_; }

  Vector solve(const Vector& rhs, SolveReport* report = nullptr) const {
    const auto start = std::chrono::steady_clock::now();
    if (rhs.size() != m_->rows()) throw InvalidInput("right-hand side size mismatch");
    if (!rhs.allFinite()) throw InvalidInput("right-hand side has non-finite entries");
    Vector x;
    int iterations = 1;
    if (kind_ == SolverKind::Direct) {
      x = lu_->solve(rhs);
      if (relative_residual(x, rhs) > Scalar(opt_.tolerance)) {
        x += lu_->solve(Vector(rhs - (*m_) * x));
        iterations = 2;
      }
    } else {
      x = krylov_->solve(rhs);
      iterations = static_cast<int>(krylov_->iterations());
    }
    const Scalar res = relative_residual(x, rhs);
    if (!x.allFinite() || !(res <= Scalar(opt_.tolerance)))
      throw SolverError("linear solve missed its tolerance",
                        static_cast<double>(res) / std::numeric_limits<double>::epsilon());
    if (report) {
      report->residual = static_cast<double>(res);
      report->iterations = iterations;
      report->solver = kind_;
      report->wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return x;
  }

 private:
  using Krylov = Eigen::BiCGSTAB<SparseMatrix<Scalar>, Eigen::DiagonalPreconditioner<Scalar>>;

  Scalar relative_residual(const Vector& x, const Vector& rhs) const {
    const Scalar nb = rhs.norm();
    const Scalar nr = (rhs - (*m_) * x).norm();
    return nb > Scalar(0) ? nr / nb : nr;
  }

  SolverOptions opt_;
  SolverKind kind_ = SolverKind::Direct;
  std::shared_ptr<SparseMatrix<Scalar>> m_;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix<Scalar>>> lu_;
  std::shared_ptr<Krylov> krylov_;
};

/// G_lambda = (lambda - L_h)^{-1}
template <typename Scalar>
class Resolvent {
 public:
  Resolvent(const DiscreteGenerator<Scalar>& gen, Scalar lambda, const SolverOptions& opt = {})
      : lambda_(check(lambda)), solver_(gen.matrix, lambda, Scalar(1), opt) {}

  Scalar lambda() const { return lambda_; }

  NodeValues<Scalar> operator()(const NodeValues<Scalar>& f, SolveReport* report = nullptr) const {
    return solver_.solve(f, report);
  }

 private:
  static Scalar check(Scalar lambda) {
    if (!(lambda > Scalar(0))) throw InvalidInput("resolvent parameter lambda must be positive");
    return lambda;
  }

  Scalar lambda_;
  ShiftedSolver<Scalar> solver_;
};

template <typename Scalar>
struct ResolventResult {
  NodeValues<Scalar> values;
  SolveReport report;
};

/// v = (lambda I - L_h)^{-1} f
template <typename Scalar>
ResolventResult<Scalar> resolvent_apply(const DiscreteGenerator<Scalar>& gen, Scalar lambda,
                                        const NodeValues<std::type_identity_t<Scalar>>& f, double tol = 1e-10) {
  SolverOptions opt;
  opt.tolerance = tol;
  ResolventResult<Scalar> out;
  out.values = Resolvent<Scalar>(gen, lambda, opt)(f, &out.report);
  return out;
}

/**
 * Implicit Euler step (I - tau L_h)^{-1}; n steps of size t/n give the
 * Euler approximation (I - (t/n) L_h)^{-n} of T_t.
 */
template <typename Scalar>
class EulerSemigroup {
 public:
  EulerSemigroup(const DiscreteGenerator<Scalar>& gen, Scalar step, const SolverOptions& opt = {})
      : step_(check(step)), solver_(gen.matrix, Scalar(1), step, opt) {}

  Scalar step() const { return step_; }

  NodeValues<Scalar> advance(const NodeValues<Scalar>& u, SolveReport* report = nullptr) const {
    return solver_.solve(u, report);
  }

  /// Applies `steps` implicit steps; `observer(step_index, state)` sees every substep.
  template <typename Observer>
  NodeValues<Scalar> advance(NodeValues<Scalar> u, Index steps, Observer&& observer) const {
    for (Index s = 1; s <= steps; ++s) {
      u = solver_.solve(u);
      observer(s, u);
    }
    return u;
  }

  NodeValues<Scalar> advance(NodeValues<Scalar> u, Index steps) const {
    for (Index s = 0; s < steps; ++s) u = solver_.solve(u);
    return u;
  }

 private:
  static Scalar check(Scalar step) {
    if (!(step > Scalar(0))) throw InvalidInput("time step must be positive");
    return step;
  }

  Scalar step_;
  ShiftedSolver<Scalar> solver_;
};

/// u = (I - (t/n) L_h)^{-n} f
template <typename Scalar>
NodeValues<Scalar> semigroup_apply(const DiscreteGenerator<Scalar>& gen, Scalar t, Index n_steps,
                                   const NodeValues<std::type_identity_t<Scalar>>& f, const SolverOptions& opt = {}) {
  if (!(t > Scalar(0))) throw InvalidInput("semigroup time t must be positive");
  if (n_steps < 1) throw InvalidInput("semigroup needs at least one Euler step");
  return EulerSemigroup<Scalar>(gen, t / Scalar(n_steps), opt).advance(f, n_steps);
}

}  // namespace gradlab

#endif  // GRADLAB_SOLVER_HPP
