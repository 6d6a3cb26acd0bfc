#ifndef GRADLAB_VERIFICATION_HPP
#define GRADLAB_VERIFICATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gradlab/gradient.hpp"
#include "gradlab/parabolic.hpp"
#include "gradlab/solver.hpp"
#include "gradlab/test_functions.hpp"

namespace gradlab {

/// max over inner-half-box nodes of |grad_h u|
template <typename Scalar>
Scalar lipschitz_seminorm(const Grid<Scalar>& grid, const NodeValues<std::type_identity_t<Scalar>>& u) {
  const auto g = discrete_gradient(grid, u);
  Scalar m(0);
  for (Index i = 0; i < grid.size(); ++i)
    if (grid.in_inner_box(i)) m = std::max(m, g.norm[i]);
  return m;
}

/// Sup norm over the inner half-box.
template <typename Scalar>
Scalar inner_sup(const Grid<Scalar>& grid, const NodeValues<std::type_identity_t<Scalar>>& u) {
  Scalar m(0);
  for (Index i = 0; i < grid.size(); ++i)
    if (grid.in_inner_box(i)) m = std::max(m, std::abs(u[i]));
  return m;
}

enum class BoundKind {
  SemigroupPointwise,
  ResolventLemma,
  ResolventTheorem,
  SupSemigroup,
  SupResolvent,
  ParabolicSup
};

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::SemigroupPointwise: return "semigroup-pointwise";
    case BoundKind::ResolventLemma: return "resolvent-lemma";
    case BoundKind::ResolventTheorem: return "resolvent-theorem";
    case BoundKind::SupSemigroup: return "sup-semigroup";
    case BoundKind::SupResolvent: return "sup-resolvent";
    case BoundKind::ParabolicSup: return "parabolic-sup";
  }
  return "unknown";
}

/**
 * Outcome of one inequality lhs <= rhs. Pointwise bounds carry one entry
 * per grid node, and only inner-half-box nodes gate; sup bounds carry one
 * entry per time (or lambda) and all entries gate.
 */
template <typename Scalar>
struct BoundCheckReport {
  BoundKind bound = BoundKind::SemigroupPointwise;
  bool pointwise = true;
  NodeValues<Scalar> lhs, rhs, margin;
  /// gating mask, same length as margin
  std::vector<bool> gating;
  /// t or lambda per entry (sup bounds) or the single parameter (pointwise)
  std::vector<Scalar> parameters;
  Scalar max_violation = 0;
  Index violation_index = -1;
  Scalar min_margin = std::numeric_limits<Scalar>::infinity();
  Scalar max_margin = -std::numeric_limits<Scalar>::infinity();
  /// positive part of the largest increase of lhs between consecutive
  /// entries (sup bounds in time only)
  Scalar monotonicity_violation = 0;
  Scalar tolerance = 0;
  bool pass = true;

  void finalize(Scalar tol, bool check_monotone = false) {
    tolerance = tol;
    margin = rhs - lhs;
    max_violation = 0;
    violation_index = -1;
    for (Index i = 0; i < margin.size(); ++i) {
      if (!gating[static_cast<std::size_t>(i)]) continue;
      min_margin = std::min(min_margin, margin[i]);
      max_margin = std::max(max_margin, margin[i]);
      if (-margin[i] > max_violation) {
        max_violation = -margin[i];
        violation_index = i;
      }
    }
    monotonicity_violation = 0;
    if (check_monotone)
      for (Index i = 1; i < lhs.size(); ++i)
        monotonicity_violation = std::max(monotonicity_violation, lhs[i] - lhs[i - 1]);
    pass = max_violation <= tol && monotonicity_violation <= tol;
  }
};

namespace detail {
template <typename Scalar>
std::vector<bool> inner_mask(const Grid<Scalar>& grid) {
  std::vector<bool> m(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) m[static_cast<std::size_t>(i)] = grid.in_inner_box(i);
  return m;
}
}  // namespace detail

/**
 * The slack model for first-order schemes: factor * h * Lip_h(f), plus a
 * roundoff floor of 1e-9 max(1, |f|_inf) so that data with Lip_h(f) = 0
 * is not failed by solver noise.
 */
template <typename Scalar>
Scalar default_slack(const Grid<Scalar>& grid, const NodeValues<std::type_identity_t<Scalar>>& f,
                     Scalar factor = Scalar(10)) {
  const Scalar floor = Scalar(1e-9) * std::max(Scalar(1), f.cwiseAbs().maxCoeff());
  return factor * grid.spacing() * lipschitz_seminorm(grid, f) + floor;
}

/// |grad T_t f| <= T_t |grad f| with T_t = (I - (t/n) L_h)^{-n}.
template <typename Scalar>
BoundCheckReport<Scalar> check_semigroup_gradient_bound(const DiscreteGenerator<Scalar>& gen,
                                                        const NodeValues<std::type_identity_t<Scalar>>& f, Scalar t,
                                                        Index n_steps, Scalar tol,
                                                        const SolverOptions& opt = {}) {
  if (!(t > Scalar(0)) || n_steps < 1) throw InvalidInput("semigroup bound needs t > 0 and n_steps >= 1");
  const auto& grid = gen.grid;
  const EulerSemigroup<Scalar> euler(gen, t / Scalar(n_steps), opt);
  const NodeValues<Scalar> u = euler.advance(f, n_steps);
  const NodeValues<Scalar> w = euler.advance(discrete_gradient(grid, f).norm, n_steps);
  BoundCheckReport<Scalar> r;
  r.bound = BoundKind::SemigroupPointwise;
  r.lhs = discrete_gradient(grid, u).norm;
  r.rhs = w;
  r.gating = detail::inner_mask(grid);
  r.parameters = {t};
  r.finalize(tol);
  return r;
}

enum class ResolventForm { Lemma, Theorem };

/**
 * Both forms share the two resolvent solves:
 *   lemma:   |grad G f| <= G |grad f|
 *   theorem: |grad G f| <= (1/lambda) G |grad f|
 */
template <typename Scalar>
std::pair<BoundCheckReport<Scalar>, BoundCheckReport<Scalar>> check_resolvent_gradient_bounds(
    const DiscreteGenerator<Scalar>& gen, const NodeValues<std::type_identity_t<Scalar>>& f, Scalar lambda, Scalar tol,
    const SolverOptions& opt = {}) {
  const auto& grid = gen.grid;
  const Resolvent<Scalar> g(gen, lambda, opt);
  const NodeValues<Scalar> v = g(f);
  const NodeValues<Scalar> w = g(discrete_gradient(grid, f).norm);
  BoundCheckReport<Scalar> lemma;
  lemma.bound = BoundKind::ResolventLemma;
  lemma.lhs = discrete_gradient(grid, v).norm;
  lemma.rhs = w;
  lemma.gating = detail::inner_mask(grid);
  lemma.parameters = {lambda};
  BoundCheckReport<Scalar> theorem = lemma;
  theorem.bound = BoundKind::ResolventTheorem;
  theorem.rhs = w / lambda;
  lemma.finalize(tol);
  theorem.finalize(tol);
  return {lemma, theorem};
}

template <typename Scalar>
BoundCheckReport<Scalar> check_resolvent_gradient_bound(const DiscreteGenerator<Scalar>& gen,
                                                        const NodeValues<std::type_identity_t<Scalar>>& f, Scalar lambda,
                                                        ResolventForm form, Scalar tol,
                                                        const SolverOptions& opt = {}) {
  auto both = check_resolvent_gradient_bounds(gen, f, lambda, tol, opt);
  return form == ResolventForm::Lemma ? both.first : both.second;
}

/// Lip(T_t f) <= Lip(f) at each t, and non-increasing in t.
template <typename Scalar>
BoundCheckReport<Scalar> check_sup_semigroup(const DiscreteGenerator<Scalar>& gen,
                                             const NodeValues<std::type_identity_t<Scalar>>& f, std::vector<Scalar> times,
                                             Index n_steps, Scalar tol, const SolverOptions& opt = {}) {
  if (times.empty()) throw InvalidInput("sup bound needs at least one time");
  std::sort(times.begin(), times.end());
  const auto& grid = gen.grid;
  const Scalar lip_f = lipschitz_seminorm(grid, f);
  BoundCheckReport<Scalar> r;
  r.bound = BoundKind::SupSemigroup;
  r.pointwise = false;
  r.lhs.resize(static_cast<Index>(times.size()));
  r.rhs = NodeValues<Scalar>::Constant(static_cast<Index>(times.size()), lip_f);
  for (std::size_t m = 0; m < times.size(); ++m)
    r.lhs[static_cast<Index>(m)] = lipschitz_seminorm(grid, semigroup_apply(gen, times[m], n_steps, f, opt));
  r.gating.assign(times.size(), true);
  r.parameters = times;
  r.finalize(tol, true);
  return r;
}

/// lambda Lip(G_lambda f) <= Lip(f) for each lambda (stored as Lip(G f) <= Lip(f)/lambda).
template <typename Scalar>
BoundCheckReport<Scalar> check_sup_resolvent(const DiscreteGenerator<Scalar>& gen,
                                             const NodeValues<std::type_identity_t<Scalar>>& f,
                                             const std::vector<Scalar>& lambdas, Scalar tol,
                                             const SolverOptions& opt = {}) {
  if (lambdas.empty()) throw InvalidInput("sup bound needs at least one lambda");
  const auto& grid = gen.grid;
  const Scalar lip_f = lipschitz_seminorm(grid, f);
  BoundCheckReport<Scalar> r;
  r.bound = BoundKind::SupResolvent;
  r.pointwise = false;
  const Index m = static_cast<Index>(lambdas.size());
  r.lhs.resize(m);
  r.rhs.resize(m);
  for (Index k = 0; k < m; ++k) {
    const Scalar lam = lambdas[static_cast<std::size_t>(k)];
    r.lhs[k] = lipschitz_seminorm(grid, Resolvent<Scalar>(gen, lam, opt)(f));
    r.rhs[k] = lip_f / lam;
  }
  r.gating.assign(lambdas.size(), true);
  r.parameters = lambdas;
  r.finalize(tol);
  return r;
}

/// Lip(u(t)) <= Lip(f) along a scheduled parabolic trajectory, non-increasing in t.
template <typename Scalar>
BoundCheckReport<Scalar> check_sup_parabolic(const Trajectory<Scalar>& traj,
                                             const Grid<Scalar>& grid, Scalar tol) {
  if (traj.states.size() < 2) throw InvalidInput("trajectory has no states beyond t = 0");
  const Scalar lip_f = lipschitz_seminorm(grid, traj.states.front());
  BoundCheckReport<Scalar> r;
  r.bound = BoundKind::ParabolicSup;
  r.pointwise = false;
  const Index m = static_cast<Index>(traj.states.size()) - 1;
  r.lhs.resize(m);
  r.rhs = NodeValues<Scalar>::Constant(m, lip_f);
  for (Index k = 0; k < m; ++k) {
    r.lhs[k] = lipschitz_seminorm(grid, traj.states[static_cast<std::size_t>(k + 1)]);
    r.parameters.push_back(traj.times[static_cast<std::size_t>(k + 1)]);
  }
  r.gating.assign(static_cast<std::size_t>(m), true);
  r.finalize(tol, true);
  return r;
}

// ---------------------------------------------------------------------------
// Markov structure
// ---------------------------------------------------------------------------

template <typename Scalar>
struct MarkovReport {
  /// max |row sum| over interior rows and over all rows
  Scalar interior_row_sum = 0;
  Scalar all_row_sum = 0;
  /// |lambda G_lambda 1 - 1|_inf
  Scalar constant_preservation = 0;
  /// positive part of -min over the images of random nonnegative data, relative to |f|_inf
  Scalar positivity_defect = 0;
  /// |G_l f - G_m f - (m - l) G_l G_m f|_inf
  Scalar resolvent_identity = 0;
  /// positive part of |T f - T g|_inf - |f - g|_inf
  Scalar contraction_excess = 0;
  Scalar tolerance = 1e-9;
  bool pass = false;
};

template <typename Scalar>
MarkovReport<Scalar> check_markov_structure(const DiscreteGenerator<Scalar>& gen, Scalar lambda,
                                            Scalar mu, Scalar t, Index n_steps, std::uint64_t seed,
                                            int samples = 5, Scalar tol = Scalar(1e-9)) {
  const auto& grid = gen.grid;
  MarkovReport<Scalar> r;
  r.tolerance = tol;
  const NodeValues<Scalar> sums = gen.matrix * NodeValues<Scalar>::Ones(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    if (!grid.is_boundary(i)) r.interior_row_sum = std::max(r.interior_row_sum, std::abs(sums[i]));
    r.all_row_sum = std::max(r.all_row_sum, std::abs(sums[i]));
  }
  // row sums are relative to the stencil weight
  const Scalar scale = gen.matrix.diagonal().cwiseAbs().maxCoeff();
  r.interior_row_sum /= scale;
  r.all_row_sum /= scale;

  const Resolvent<Scalar> gl(gen, lambda), gm(gen, mu);
  const EulerSemigroup<Scalar> euler(gen, t / Scalar(n_steps));
  const NodeValues<Scalar> ones = NodeValues<Scalar>::Ones(grid.size());
  r.constant_preservation = (lambda * gl(ones) - ones).cwiseAbs().maxCoeff();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto random_vector = [&](Scalar lo) {
    NodeValues<Scalar> v(grid.size());
    for (Index i = 0; i < grid.size(); ++i) v[i] = lo + (Scalar(1) - lo) * Scalar(u01(rng));
    return v;
  };
  for (int s = 0; s < samples; ++s) {
    const NodeValues<Scalar> f = random_vector(Scalar(0));
    const NodeValues<Scalar> g = random_vector(Scalar(-1));
    const NodeValues<Scalar> tf = euler.advance(f, n_steps);
    const NodeValues<Scalar> gf = gl(f);
    const Scalar fmax = f.cwiseAbs().maxCoeff();
    r.positivity_defect = std::max({r.positivity_defect, -tf.minCoeff() / fmax, -gf.minCoeff() / fmax});
    const NodeValues<Scalar> id = gf - gm(f) - (mu - lambda) * gl(gm(f));
    r.resolvent_identity = std::max(r.resolvent_identity, id.cwiseAbs().maxCoeff());
    const NodeValues<Scalar> tg = euler.advance(g, n_steps);
    r.contraction_excess = std::max(r.contraction_excess, (tf - tg).cwiseAbs().maxCoeff() -
                                                              (f - g).cwiseAbs().maxCoeff());
  }
  r.positivity_defect = std::max(r.positivity_defect, Scalar(0));
  r.contraction_excess = std::max(r.contraction_excess, Scalar(0));
  const bool rows_ok = gen.boundary == BoundaryCondition::Reflecting
                           ? r.all_row_sum <= tol
                           : r.interior_row_sum <= tol;
  const bool constants_ok = gen.boundary == BoundaryCondition::Absorbing || r.constant_preservation <= tol;
  r.pass = rows_ok && constants_ok && r.resolvent_identity <= tol &&
           (!gen.monotone || (r.positivity_defect <= tol && r.contraction_excess <= tol));
  return r;
}

// ---------------------------------------------------------------------------
// Analytic Ornstein-Uhlenbeck references (A = I, b = -x)
// ---------------------------------------------------------------------------

/**
 * Closed forms for the generator Delta - x . grad:
 *   T_t <a,x>     = e^{-t} <a,x>
 *   T_t sin<a,x>  = sin(e^{-t}<a,x>) exp(-|a|^2 (1 - e^{-2t}) / 2)
 *   T_t |x|^2     = e^{-2t}|x|^2 + d (1 - e^{-2t})
 *   G_l <a,x>     = <a,x> / (l + 1)
 *   G_l |x|^2     = |x|^2/(l+2) + d (1/l - 1/(l+2))
 *   rho(x)        = (2 pi)^{-d/2} e^{-|x|^2/2}
 * and, for b(t,x) = -c(t) x, T_{0,t}<a,x> = exp(-int_0^t c) <a,x>.
 */
template <typename Scalar>
struct OracleSpec {
  enum class Family { Semigroup, Resolvent, StationaryDensity, ScheduledParabolic };
  enum class Datum { Constant, Linear, Sine, Quadratic };

  Family family = Family::Semigroup;
  Datum datum = Datum::Linear;
  /// slope a (linear, sine) or the constant value in entry 0
  Point<Scalar> slope;
  Scalar time = 0;
  Scalar lambda = 0;
  /// integral of c over [0, t] for the scheduled family
  Scalar integrated_rate = 0;
};

template <typename Scalar>
NodeValues<Scalar> ou_oracle(const OracleSpec<Scalar>& spec, const std::vector<Point<Scalar>>& points) {
  using Family = typename OracleSpec<Scalar>::Family;
  using Datum = typename OracleSpec<Scalar>::Datum;
  if (spec.family == Family::Semigroup && !(spec.time > Scalar(0)))
    throw InvalidInput("OU semigroup oracle needs t > 0");
  if (spec.family == Family::Resolvent && !(spec.lambda > Scalar(0)))
    throw InvalidInput("OU resolvent oracle needs lambda > 0");
  NodeValues<Scalar> out(static_cast<Index>(points.size()));
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& x = points[p];
    const Scalar d = Scalar(x.size());
    Scalar v(0);
    switch (spec.family) {
      case Family::StationaryDensity:
        v = std::pow(Scalar(2) * std::numbers::pi_v<Scalar>, -d / Scalar(2)) *
            std::exp(-x.squaredNorm() / Scalar(2));
        break;
      case Family::Semigroup: {
        const Scalar e = std::exp(-spec.time);
        switch (spec.datum) {
          case Datum::Constant: v = spec.slope[0]; break;
          case Datum::Linear: v = e * spec.slope.dot(x); break;
          case Datum::Sine:
            v = std::sin(e * spec.slope.dot(x)) *
                std::exp(-spec.slope.squaredNorm() * (Scalar(1) - e * e) / Scalar(2));
            break;
          case Datum::Quadratic: v = e * e * x.squaredNorm() + d * (Scalar(1) - e * e); break;
        }
        break;
      }
      case Family::Resolvent: {
        const Scalar l = spec.lambda;
        switch (spec.datum) {
          case Datum::Constant: v = spec.slope[0] / l; break;
          case Datum::Linear: v = spec.slope.dot(x) / (l + Scalar(1)); break;
          case Datum::Quadratic:
            v = x.squaredNorm() / (l + Scalar(2)) + d * (Scalar(1) / l - Scalar(1) / (l + Scalar(2)));
            break;
          case Datum::Sine: throw InvalidInput("no closed-form OU resolvent for sine data");
        }
        break;
      }
      case Family::ScheduledParabolic:
        switch (spec.datum) {
          case Datum::Constant: v = spec.slope[0]; break;
          case Datum::Linear: v = std::exp(-spec.integrated_rate) * spec.slope.dot(x); break;
          default: throw InvalidInput("scheduled OU oracle supports constant and linear data only");
        }
        break;
    }
    out[static_cast<Index>(p)] = v;
  }
  return out;
}

/// Maps a test function onto an oracle datum; nullopt when no closed form exists.
template <typename Scalar>
std::optional<typename OracleSpec<Scalar>::Datum> oracle_datum(const TestFunction<Scalar>& f) {
  using Datum = typename OracleSpec<Scalar>::Datum;
  switch (f.family) {
    case TestFunction<Scalar>::Family::Linear: return Datum::Linear;
    case TestFunction<Scalar>::Family::Sine: return Datum::Sine;
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Refinement studies
// ---------------------------------------------------------------------------

template <typename Scalar>
struct RefinementRow {
  Scalar h = 0;
  Scalar value = 0;
  /// log(v_prev / v) / log(h_prev / h); empty on the first row or when undefined
  std::optional<Scalar> order;
};

template <typename Scalar>
struct RefinementTable {
  std::vector<RefinementRow<Scalar>> rows;

  bool all_zero() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.value == Scalar(0); });
  }
  bool non_increasing(Scalar slack = 0) const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].value > rows[i - 1].value + slack) return false;
    return true;
  }
  /// value_{i} / value_{i-1}
  std::vector<Scalar> ratios() const {
    std::vector<Scalar> out;
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(rows[i].value / rows[i - 1].value);
    return out;
  }
  std::string order_note() const { return all_zero() ? "n/a, margin positive" : ""; }
};

/**
 * Runs `measure(level) -> (h, value)` for level = 0..levels-1 and reports the
 * observed convergence order of `value` between consecutive levels.
 */
template <typename Scalar, typename Measure>
RefinementTable<Scalar> refinement_study(Measure&& measure, int levels) {
  if (levels < 3) throw InvalidInput("refinement study needs at least three levels");
  RefinementTable<Scalar> t;
  for (int l = 0; l < levels; ++l) {
    const auto [h, value] = measure(l);
    RefinementRow<Scalar> row{Scalar(h), Scalar(value), std::nullopt};
    if (!t.rows.empty()) {
      const auto& prev = t.rows.back();
      if (prev.value > Scalar(0) && row.value > Scalar(0) && prev.h != row.h)
        row.order = std::log(prev.value / row.value) / std::log(prev.h / row.h);
    }
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace gradlab

#endif  // GRADLAB_VERIFICATION_HPP
