#ifndef GRADLAB_PARABOLIC_HPP
#define GRADLAB_PARABOLIC_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "gradlab/solver.hpp"

namespace gradlab {

/**
 * Piecewise-constant coefficients on [0, 1]: (A_k, b_k) on
 * [t_{k-1}, t_k), breakpoints 0 = t_0 < ... < t_N = 1.
 */
template <typename Scalar>
struct CoefficientSchedule {
  std::vector<Scalar> breakpoints;
  std::vector<DiffusionMatrix<Scalar>> diffusion;
  std::vector<VectorField<Scalar>> drift;

  static CoefficientSchedule constant(const DiffusionMatrix<Scalar>& a,
                                      const VectorField<Scalar>& b) {
    return {{Scalar(0), Scalar(1)}, {a}, {b}};
  }

  std::size_t intervals() const { return diffusion.size(); }

  void validate() const {
    if (breakpoints.size() < 2) throw InvalidInput("schedule needs at least two breakpoints");
    if (breakpoints.front() != Scalar(0) || breakpoints.back() != Scalar(1))
      throw InvalidInput("schedule breakpoints must start at 0 and end at 1");
    for (std::size_t k = 1; k < breakpoints.size(); ++k)
      if (!(breakpoints[k] > breakpoints[k - 1]))
        throw InvalidInput("schedule breakpoints must be strictly increasing");
    if (diffusion.size() != breakpoints.size() - 1 || drift.size() != breakpoints.size() - 1)
      throw InvalidInput("schedule needs one (A, b) pair per interval");
    const int d = diffusion.front().dimension();
    for (std::size_t k = 0; k < intervals(); ++k)
      if (diffusion[k].dimension() != d || drift[k].dimension() != d)
        throw InvalidInput("schedule coefficients disagree on the dimension");
  }

  /// (Hb) sampled on every interval.
  std::vector<DissipativityReport<Scalar>> check_dissipative(
      const std::vector<SamplePair<Scalar>>& pairs, Scalar tolerance) const {
    std::vector<DissipativityReport<Scalar>> out;
    for (const auto& b : drift) out.push_back(gradlab::check_dissipative(b, pairs, tolerance));
    return out;
  }
};

/**
 * Sorted {s0 + l 2^{-n} mod 1 : l = 0..2^n-1} together with 0 and 1.
 */
template <typename Scalar>
std::vector<Scalar> time_sampler(int n, Scalar s0) {
  if (n < 1 || n > 30) throw InvalidInput("time sampler level n must be in 1..30");
  if (!(s0 >= Scalar(0) && s0 < Scalar(1))) throw InvalidInput("time sampler offset must lie in [0, 1)");
  const long count = 1L << n;
  const Scalar step = std::ldexp(Scalar(1), -n);
  std::vector<Scalar> pts{Scalar(0), Scalar(1)};
  for (long l = 0; l < count; ++l) pts.push_back(std::fmod(s0 + Scalar(l) * step, Scalar(1)));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

/// 2^{-n} sum_l theta(t_{n,l}).
template <typename Scalar, typename F>
Scalar riemann_sum(F&& theta, int n, Scalar s0) {
  if (n < 1 || n > 30) throw InvalidInput("time sampler level n must be in 1..30");
  const long count = 1L << n;
  const Scalar step = std::ldexp(Scalar(1), -n);
  Scalar sum(0);
  for (long l = 0; l < count; ++l) sum += theta(std::fmod(s0 + Scalar(l) * step, Scalar(1)));
  return sum * step;
}

/**
 * Freezes time-dependent coefficients on the sampler partition: the piece
 * starting at a sampler point uses the coefficients at that point; when
 * s0 > 0 the leading piece [0, s0) wraps around and uses the last sampler point.
 */
template <typename Scalar>
CoefficientSchedule<Scalar> sampled_schedule(
    int n, Scalar s0,
    const std::function<std::pair<DiffusionMatrix<Scalar>, VectorField<Scalar>>(Scalar)>& coeff) {
  CoefficientSchedule<Scalar> s;
  s.breakpoints = time_sampler(n, s0);
  const long count = 1L << n;
  const Scalar step = std::ldexp(Scalar(1), -n);
  bool zero_is_sample = false;
  Scalar last(0);
  for (long l = 0; l < count; ++l) {
    const Scalar p = std::fmod(s0 + Scalar(l) * step, Scalar(1));
    zero_is_sample = zero_is_sample || p == Scalar(0);
    last = std::max(last, p);
  }
  for (std::size_t k = 0; k + 1 < s.breakpoints.size(); ++k) {
    const Scalar left = s.breakpoints[k];
    const Scalar at = (k == 0 && !zero_is_sample) ? last : left;
    auto [a, b] = coeff(at);
    s.diffusion.push_back(a);
    s.drift.push_back(b);
  }
  s.validate();
  return s;
}

template <typename Scalar>
struct ParabolicOptions {
  /// exactly one of steps_per_interval > 0 or max_step > 0 selects the substeps
  Index steps_per_interval = 0;
  Scalar max_step = 0;
  BoundaryCondition boundary = BoundaryCondition::Reflecting;
  /// extra reporting times; recorded at the first substep reaching them
  std::vector<Scalar> report_times;
  /// weak-form test functions; bumps in the inner half-box when empty
  std::vector<NodeValues<Scalar>> test_functions;
  SolverOptions solver;
};

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<NodeValues<Scalar>> states;
  /// per recorded time: max over test functions of
  /// | h^d phi.(u(t) - f) - int_0^t h^d phi.(L_s u(s)) ds |
  std::vector<Scalar> weak_residuals;

  Scalar max_weak_residual() const {
    Scalar m(0);
    for (auto r : weak_residuals) m = std::max(m, r);
    return m;
  }
  const NodeValues<Scalar>& final_state() const { return states.back(); }
};

/// Smooth bumps of radius R/4 centred at 0 and +-R/4 e_0.
template <typename Scalar>
std::vector<NodeValues<Scalar>> default_test_functions(const Grid<Scalar>& grid) {
  const Scalar r = grid.radius() / Scalar(4);
  std::vector<NodeValues<Scalar>> out;
  for (Scalar shift : {Scalar(0), -r, r}) {
    Point<Scalar> c = Point<Scalar>::Zero(grid.dimension());
    c[0] = shift;
    out.push_back(grid.sample([&](const Point<Scalar>& x) {
      const Scalar q = (x - c).squaredNorm() / (r * r);
      return q < Scalar(1) ? std::exp(-Scalar(1) / (Scalar(1) - q)) : Scalar(0);
    }));
  }
  return out;
}

/**
 * u(t) = T^{(k)}_{t - t_{k-1}} T^{(k-1)}_{t_{k-1} - t_{k-2}} ... T^{(1)}_{t_1} f,
 * each factor evaluated with implicit Euler substeps.
 */
template <typename Scalar>
Trajectory<Scalar> parabolic_solve(const CoefficientSchedule<Scalar>& schedule,
                                   const Grid<Scalar>& grid, const NodeValues<std::type_identity_t<Scalar>>& f,
                                   const ParabolicOptions<Scalar>& opt) {
  schedule.validate();
  if ((opt.steps_per_interval > 0) == (opt.max_step > Scalar(0)))
    throw InvalidInput("choose exactly one of steps_per_interval and max_step");
  if (f.size() != grid.size()) throw InvalidInput("initial data size does not match the grid");
  if (!f.allFinite()) throw InvalidInput("initial data has non-finite entries");

  const auto tests = opt.test_functions.empty() ? default_test_functions(grid) : opt.test_functions;
  const Scalar vol = grid.cell_volume();
  std::vector<Scalar> integral(tests.size(), Scalar(0));
  std::vector<Scalar> pending = opt.report_times;
  std::sort(pending.begin(), pending.end());

  Trajectory<Scalar> traj;
  auto record = [&](Scalar t, const NodeValues<Scalar>& u) {
    Scalar res(0);
    for (std::size_t j = 0; j < tests.size(); ++j)
      res = std::max(res, std::abs(vol * tests[j].dot(u - f) - integral[j]));
    traj.times.push_back(t);
    traj.states.push_back(u);
    traj.weak_residuals.push_back(res);
  };
  record(Scalar(0), f);

  NodeValues<Scalar> u = f;
  std::size_t next = 0;
  while (next < pending.size() && pending[next] <= Scalar(0)) ++next;
  for (std::size_t k = 0; k < schedule.intervals(); ++k) {
    const Scalar t0 = schedule.breakpoints[k], t1 = schedule.breakpoints[k + 1];
    const Scalar len = t1 - t0;
    const Index steps = opt.steps_per_interval > 0
                            ? opt.steps_per_interval
                            : std::max<Index>(1, static_cast<Index>(std::ceil(len / opt.max_step - Scalar(1e-9))));
    const Scalar tau = len / Scalar(steps);
    const auto gen = assemble_generator(grid, schedule.diffusion[k], schedule.drift[k], opt.boundary);
    const EulerSemigroup<Scalar> euler(gen, tau, opt.solver);
    for (Index s = 1; s <= steps; ++s) {
      u = euler.advance(u);
      const NodeValues<Scalar> lu = gen.matrix * u;
      for (std::size_t j = 0; j < tests.size(); ++j) integral[j] += tau * vol * tests[j].dot(lu);
      const Scalar t = s == steps ? t1 : t0 + Scalar(s) * tau;
      bool due = s == steps;
      while (next < pending.size() && pending[next] <= t + Scalar(1e-12)) {
        due = true;
        ++next;
      }
      if (due) record(t, u);
    }
  }
  return traj;
}

}  // namespace gradlab

#endif  // GRADLAB_PARABOLIC_HPP
