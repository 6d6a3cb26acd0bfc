#include "doctest.h"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <random>

#include "gradlab/parabolic.hpp"
#include "gradlab/test_functions.hpp"
#include "gradlab/verification.hpp"

using namespace gradlab;
using S = double;
using TF = TestFunction<S>;

namespace {

VectorField<S> ou(int d) { return VectorField<S>::linear(-MatrixX<S>::Identity(d, d)); }

DiscreteGenerator<S> ou_generator(S radius, Index n) {
  return assemble_generator(Grid<S>(1, radius, n), DiffusionMatrix<S>::identity(1), ou(1));
}

Point<S> unit1() { return Point<S>::Ones(1); }

std::vector<Point<S>> points_of(const Grid<S>& g) {
  std::vector<Point<S>> pts;
  for (Index i = 0; i < g.size(); ++i) pts.push_back(g.point(i));
  return pts;
}

}  // namespace

TEST_CASE("lipschitz_seminorm examples") {
  Grid<S> g(1, 2.0, 41);
  CHECK(lipschitz_seminorm(g, NodeValues<S>::Constant(41, -3.0)) == 0.0);
  CHECK(lipschitz_seminorm(g, g.sample([](const Point<S>& x) { return x[0]; })) == doctest::Approx(1.0));
  CHECK(lipschitz_seminorm(g, g.sample([](const Point<S>& x) { return std::abs(x[0]); })) == doctest::Approx(1.0));
  Grid<S> g2(2, 2.0, 21);
  CHECK(lipschitz_seminorm(g2, g2.sample([](const Point<S>& x) { return 3 * x[0] + 4 * x[1]; })) ==
        doctest::Approx(5.0));
}

TEST_CASE("report bookkeeping") {
  BoundCheckReport<S> r;
  r.lhs = NodeValues<S>(4);
  r.rhs = NodeValues<S>(4);
  r.lhs << 1.0, 2.0, 0.0, 5.0;
  r.rhs << 0.0, 2.5, 1.0, 1.0;
  r.gating = {false, true, true, false};
  r.finalize(0.0);
  // ungated entries never fail the check
  CHECK(r.pass);
  CHECK(r.max_violation == 0.0);
  CHECK(r.min_margin == 0.5);
  CHECK(r.margin[3] == -4.0);
  r.gating = {true, true, true, false};
  r.finalize(0.5);
  CHECK(r.max_violation == 1.0);
  CHECK(r.violation_index == 0);
  CHECK_FALSE(r.pass);
  r.finalize(1.0);
  CHECK(r.pass);

  BoundCheckReport<S> sup;
  sup.lhs = NodeValues<S>(3);
  sup.lhs << 1.0, 0.8, 0.9;
  sup.rhs = NodeValues<S>::Constant(3, 1.0);
  sup.gating = {true, true, true};
  sup.finalize(0.05, true);
  CHECK(sup.monotonicity_violation == doctest::Approx(0.1));
  CHECK_FALSE(sup.pass);
  CHECK(std::string(to_string(BoundKind::ResolventTheorem)) == "resolvent-theorem");
  CHECK(std::string(to_string(BoundKind::ParabolicSup)) == "parabolic-sup");
}

TEST_CASE("OU semigroup bound with linear data") {
  auto gen = ou_generator(6.0, 401);
  const auto& g = gen.grid;
  const auto f = TF::linear(unit1()).on(g);
  auto r = check_semigroup_gradient_bound(gen, f, 1.0, 64, default_slack(g, f));
  CHECK(r.pass);
  CHECK(r.max_violation == 0.0);
  CHECK(std::abs(r.min_margin - (1 - std::exp(-1.0))) <= 5 * g.spacing());
  CHECK(std::abs(r.max_margin - (1 - std::exp(-1.0))) <= 5 * g.spacing());

  const auto c2 = TF::constant(1, 2.0).on(g);
  CHECK(default_slack(g, c2) == doctest::Approx(2e-9));
  auto c = check_semigroup_gradient_bound(gen, c2, 1.0, 8, default_slack(g, c2));
  CHECK(c.pass);
  CHECK(c.max_violation <= 1e-12);
  CHECK(std::abs(c.min_margin) <= 1e-12);
}

TEST_CASE("regularized cubic drift satisfies the semigroup bound") {
  Grid<S> g(1, 3.0, 121);
  auto cubic = VectorField<S>::polynomial_gradient(1, {{0.25, {4}}}, true);
  auto bk = regularized_drift(cubic, 8);
  auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(1), bk);
  CHECK(gen.monotone);
  const auto f = TF::sine(unit1()).on(g);
  for (S t : {0.1, 1.0}) {
    auto r = check_semigroup_gradient_bound(gen, f, t, 32, default_slack(g, f));
    CHECK(r.pass);
  }
}

TEST_CASE("resolvent bounds on OU: lemma and theorem forms") {
  auto gen = ou_generator(6.0, 401);
  const auto& g = gen.grid;
  const S h = g.spacing();
  const auto f = TF::linear(unit1()).on(g);
  auto [l1, t1] = check_resolvent_gradient_bounds(gen, f, 1.0, default_slack(g, f));
  CHECK(l1.pass);
  CHECK(std::abs(l1.min_margin - 0.5) <= 5 * h);
  CHECK(t1.pass);

  for (S lambda : {2.0, 3.0, 4.0, 8.0}) {
    auto [lemma, theorem] = check_resolvent_gradient_bounds(gen, f, lambda, default_slack(g, f));
    CHECK(lemma.pass);
    CHECK(std::abs(lemma.min_margin - (1 / lambda - 1 / (lambda + 1))) <= 5 * h);
    // the 10h slack (0.3 here) would hide the violation; h Lip(f) does not
    CHECK_FALSE(check_resolvent_gradient_bound(gen, f, lambda, ResolventForm::Theorem, default_slack(g, f, 1.0)).pass);
    CHECK(std::abs(theorem.max_violation - (1 / (lambda + 1) - 1 / (lambda * lambda))) <= 5 * h);
  }
  auto th4 = check_resolvent_gradient_bound(gen, f, 4.0, ResolventForm::Theorem, 0.0);
  CHECK(std::abs(th4.max_violation - 0.1375) <= 5 * h);

  const auto c = TF::constant(1, 1.0).on(g);
  CHECK(check_resolvent_gradient_bound(gen, c, 4.0, ResolventForm::Lemma, default_slack(g, c)).pass);
  CHECK(check_resolvent_gradient_bound(gen, c, 4.0, ResolventForm::Theorem, default_slack(g, c)).pass);
}

TEST_CASE("sup-norm bounds") {
  auto gen = ou_generator(5.0, 201);
  const auto& g = gen.grid;
  const auto f = TF::sine(unit1()).on(g);
  std::vector<S> times;
  for (int k = 1; k <= 10; ++k) times.push_back(0.1 * k);
  auto r = check_sup_semigroup(gen, f, times, 32, default_slack(g, f));
  CHECK(r.pass);
  CHECK(r.lhs.maxCoeff() <= 1 + 10 * g.spacing());
  auto rr = check_sup_resolvent(gen, f, {0.5, 1.0, 4.0}, default_slack(g, f));
  CHECK(rr.pass);

  const auto c = TF::constant(1, 4.0).on(g);
  auto rc = check_sup_semigroup(gen, c, {0.5, 1.0}, 8, 0.0);
  CHECK(rc.lhs.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(rc.rhs.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(check_sup_semigroup(gen, f, {}, 8, 0.0), InvalidInput);
}

TEST_CASE("scheduled rotational OU keeps the Lipschitz seminorm") {
  Grid<S> g(2, 4.0, 41);
  MatrixX<S> j(2, 2);
  j << 0, -1, 1, 0;
  CoefficientSchedule<S> s;
  s.breakpoints = {0, 0.25, 0.5, 0.75, 1};
  for (int k = 0; k < 4; ++k) {
    s.diffusion.push_back(DiffusionMatrix<S>::identity(2));
    s.drift.push_back(VectorField<S>::linear(MatrixX<S>(-MatrixX<S>::Identity(2, 2) + (k % 2 ? -1.0 : 1.0) * j)));
  }
  Point<S> a(2);
  a << 1, 0.5;
  const auto f = TF::sine(a).on(g);
  ParabolicOptions<S> opt;
  opt.steps_per_interval = 8;
  const auto traj = parabolic_solve(s, g, f, opt);
  auto r = check_sup_parabolic(traj, g, default_slack(g, f));
  CHECK(r.pass);
  CHECK(r.lhs.size() == 4);
}

TEST_CASE("Markov structure report") {
  auto gen = ou_generator(4.0, 81);
  auto r = check_markov_structure(gen, 1.0, 3.0, 0.5, Index(10), 42);
  CHECK(r.pass);
  CHECK(r.all_row_sum <= 1e-12);
  CHECK(r.constant_preservation <= 1e-9);
  CHECK(r.positivity_defect <= 1e-12);
  CHECK(r.contraction_excess <= 1e-12);
}

TEST_CASE("OU oracle closed forms") {
  std::vector<Point<S>> pts;
  for (S x : {-2.0, -0.5, 0.0, 1.25, 3.0}) pts.push_back(Point<S>::Constant(1, x));
  OracleSpec<S> spec;
  spec.slope = unit1();
  spec.time = std::log(2.0);
  auto v = ou_oracle(spec, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(v[Index(i)] == doctest::Approx(pts[i][0] / 2));

  spec.datum = OracleSpec<S>::Datum::Quadratic;
  spec.time = 60.0;
  for (S y : ou_oracle(spec, pts)) CHECK(y == doctest::Approx(1.0));

  spec.datum = OracleSpec<S>::Datum::Constant;
  spec.slope = Point<S>::Constant(1, 1.0);
  for (S y : ou_oracle(spec, pts)) CHECK(y == 1.0);
  spec.family = OracleSpec<S>::Family::Resolvent;
  spec.lambda = 4.0;
  for (S y : ou_oracle(spec, pts)) CHECK(y == 0.25);

  spec.datum = OracleSpec<S>::Datum::Sine;
  CHECK_THROWS_AS(ou_oracle(spec, pts), InvalidInput);
  spec.datum = OracleSpec<S>::Datum::Linear;
  spec.lambda = 0.0;
  CHECK_THROWS_AS(ou_oracle(spec, pts), InvalidInput);
  spec.family = OracleSpec<S>::Family::Semigroup;
  spec.time = -1.0;
  CHECK_THROWS_AS(ou_oracle(spec, pts), InvalidInput);

  CHECK(oracle_datum(TF::linear(unit1())) == OracleSpec<S>::Datum::Linear);
  CHECK_FALSE(oracle_datum(TF::bump(unit1(), 1.0)).has_value());
}

TEST_CASE("OU oracle agrees with Mehler quadrature") {
  boost::math::quadrature::tanh_sinh<S> ts;
  boost::math::quadrature::exp_sinh<S> es;
  const S inf = std::numeric_limits<S>::infinity();
  Point<S> a(2);
  a << 0.7, -1.1;
  for (S t : {0.1, 0.5, 2.0}) {
    const S e = std::exp(-t), s = std::sqrt(1 - e * e);
    Point<S> x(2);
    x << 0.3, 1.4;
    // <a, Z> is N(0, |a|^2), so one Gaussian integral suffices
    const S na = a.norm();
    auto mehler = [&](auto&& f) {
      return ts.integrate([&](S z) { return f(e * a.dot(x) + s * na * z) * std::exp(-z * z / 2); }, -inf, inf) /
             std::sqrt(2 * M_PI);
    };
    OracleSpec<S> spec;
    spec.slope = a;
    spec.time = t;
    spec.datum = OracleSpec<S>::Datum::Sine;
    CHECK(ou_oracle(spec, {x})[0] == doctest::Approx(mehler([](S y) { return std::sin(y); })).epsilon(1e-10));
    spec.datum = OracleSpec<S>::Datum::Linear;
    CHECK(ou_oracle(spec, {x})[0] == doctest::Approx(mehler([](S y) { return y; })).epsilon(1e-10));

    // G_l f = int_0^inf e^{-l s} T_s f ds
    for (S lambda : {0.5, 4.0}) {
      OracleSpec<S> rs;
      rs.family = OracleSpec<S>::Family::Resolvent;
      rs.lambda = lambda;
      rs.datum = OracleSpec<S>::Datum::Quadratic;
      const S integral = es.integrate([&](S u) {
        const S eu = std::exp(-u);
        return std::exp(-lambda * u) * (eu * eu * x.squaredNorm() + 2 * (1 - eu * eu));
      });
      CHECK(ou_oracle(rs, {x})[0] == doctest::Approx(integral).epsilon(1e-10));
    }
  }
}

TEST_CASE("refinement studies") {
  auto sine_violation = [](int level) {
    const Index n = 40 * (Index(1) << level) + 1;
    auto gen = ou_generator(4.0, n);
    const auto f = TF::sine(unit1()).on(gen.grid);
    auto r = check_semigroup_gradient_bound(gen, f, 0.5, 16, 0.0);
    return std::pair<S, S>{gen.grid.spacing(), r.max_violation};
  };
  auto t = refinement_study<S>(sine_violation, 3);
  CHECK(t.all_zero());
  CHECK(t.order_note() == "n/a, margin positive");
  CHECK_FALSE(t.rows[1].order.has_value());

  auto oracle_error = [](int level) {
    const Index n = 100 * (Index(1) << level) + 1;
    auto gen = ou_generator(6.0, n);
    const auto& g = gen.grid;
    const auto u = semigroup_apply(gen, 1.0, 16 << level, TF::linear(unit1()).on(g));
    OracleSpec<S> spec;
    spec.slope = unit1();
    spec.time = 1.0;
    const auto exact = ou_oracle(spec, points_of(g));
    S err = 0;
    for (Index i = 0; i < g.size(); ++i)
      if (g.in_inner_box(i)) err = std::max(err, std::abs(u[i] - exact[i]));
    return std::pair<S, S>{g.spacing(), err};
  };
  auto e = refinement_study<S>(oracle_error, 3);
  for (S r : e.ratios()) {
    CHECK(r >= 0.4);
    CHECK(r <= 0.7);
  }
  CHECK(e.rows[2].order.value() == doctest::Approx(1.0).epsilon(0.35));
  CHECK(e.non_increasing());

  CHECK_THROWS_AS(refinement_study<S>(oracle_error, 1), InvalidInput);
}

TEST_CASE("random strongly dissipative linear drifts satisfy the pointwise bounds") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(-1, 1);
  Grid<S> g(2, 3.0, 31);
  for (int trial = 0; trial < 4; ++trial) {
    MatrixX<S> q(2, 2), k(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) q(i, j) = u(rng);
    const S w = u(rng);
    k << 0, -w, w, 0;
    const MatrixX<S> m = -(q * q.transpose() + 0.2 * MatrixX<S>::Identity(2, 2)) + 2 * k;
    auto drift = VectorField<S>::linear(m);
    REQUIRE(check_dissipative(drift, sample_pairs<S>(2, 3.0, 200, trial), 0.0).pass);
    auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(2), drift);
    Point<S> a(2);
    a << u(rng), u(rng);
    for (const auto& tf : {TF::linear(a), TF::sine(a), TF::clipped_linear(a, 1.0)}) {
      const auto f = tf.on(g);
      const S tol = default_slack(g, f);
      CHECK(check_semigroup_gradient_bound(gen, f, 0.5, 16, tol).pass);
      CHECK(check_resolvent_gradient_bound(gen, f, 1.0, ResolventForm::Lemma, tol).pass);
    }
  }
}
