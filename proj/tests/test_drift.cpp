#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "gradlab/drift.hpp"

using namespace gradlab;
using S = double;

namespace {

Point<S> p1(S x) {
  Point<S> p(1);
  p << x;
  return p;
}

Point<S> p2(S x, S y) {
  Point<S> p(2);
  p << x, y;
  return p;
}

VectorField<S> scalar_linear(S c) {
  MatrixX<S> m(1, 1);
  m << c;
  return VectorField<S>::linear(m);
}

VectorField<S> cubic() { return VectorField<S>::polynomial_gradient(1, {{0.25, {4}}}, true); }

}  // namespace

TEST_CASE("check_dissipative on linear and cubic fields") {
  std::vector<SamplePair<S>> pairs{{p1(0), p1(1)}, {p1(1), p1(-2)}, {p1(-3), p1(0.5)}};
  auto rep = check_dissipative(scalar_linear(-1), pairs, 0.0);
  CHECK(rep.pass);
  CHECK(rep.sample_count == 3);
  // max of -|h|^2 is attained by the shortest h
  CHECK(rep.max_inner_product == doctest::Approx(-0.25));
  CHECK(rep.witness.h[0] == 0.5);

  auto bad = check_dissipative(scalar_linear(1), {{p1(0), p1(1)}}, 0.0);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_inner_product == doctest::Approx(1.0));
  CHECK(bad.witness.x[0] == 0.0);
  CHECK(bad.witness.h[0] == 1.0);

  auto cub = check_dissipative(cubic(), sample_pairs<S>(1, 3.0, 500, 7), 0.0);
  CHECK(cub.pass);

  CHECK_THROWS_AS(check_dissipative(cubic(), {}, 0.0), InvalidInput);
}

TEST_CASE("polynomial gradient evaluates -grad P") {
  // P = x^2 y + y^4/4  ->  b = -(2xy, x^2 + y^3)
  auto b = VectorField<S>::polynomial_gradient(2, {{1.0, {2, 1}}, {0.25, {0, 4}}}, false);
  const auto v = b(p2(1.5, -2.0));
  CHECK(v[0] == doctest::Approx(6.0));
  CHECK(v[1] == doctest::Approx(-(2.25 - 8.0)));
  CHECK(cubic()(p1(2.0))[0] == doctest::Approx(-8.0));
}

TEST_CASE("linear field declares dissipativity from its symmetric part") {
  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  CHECK(VectorField<S>::linear(rot).declared_dissipative());
  MatrixX<S> shear(2, 2);
  shear << 0, 3, 0, 0;
  CHECK_FALSE(VectorField<S>::linear(shear).declared_dissipative());
}

TEST_CASE("tabulated field interpolates and rejects points off its box") {
  Grid<S> g(1, 1.0, 5);
  MatrixX<S> vals(5, 1);
  vals << 1, 0, -1, -2, -3;
  auto f = VectorField<S>::tabulated(g, vals, true);
  CHECK(f(p1(-1.0))[0] == doctest::Approx(1.0));
  CHECK(f(p1(0.25))[0] == doctest::Approx(-1.5));
  CHECK_THROWS_AS(f(p1(1.5)), DomainError);
  // the convolution reaches 1/j = 0.5 past x = 0.8
  CHECK_THROWS_AS(mollify(f, 2.0)(p1(0.8)), DomainError);
}

TEST_CASE("mollifier profile has unit mass and even symmetry") {
  Mollifier<S> m1(1);
  boost::math::quadrature::tanh_sinh<S> ts;
  const S mass1 = ts.integrate([&](S x) { return m1.profile(p1(x)); }, -1.0, 1.0);
  CHECK(std::abs(mass1 - 1.0) < 1e-10);

  Mollifier<S> m2(2);
  using boost::math::quadrature::gauss_kronrod;
  const S mass2 = gauss_kronrod<S, 61>::integrate(
      [&](S x) {
        const S w = std::sqrt(std::max(0.0, 1.0 - x * x));
        return gauss_kronrod<S, 61>::integrate([&](S y) { return m2.profile(p2(x, y)); }, -w, w,
                                               15, 1e-14);
      },
      -1.0, 1.0, 15, 1e-14);
  CHECK(std::abs(mass2 - 1.0) < 1e-10);

  for (S x : {0.1, 0.37, 0.8, 0.99}) CHECK(m1.profile(p1(x)) == m1.profile(p1(-x)));
  CHECK(m2.profile(p2(0.3, -0.4)) == m2.profile(p2(-0.3, 0.4)));
  CHECK(m1.profile(p1(1.0)) == 0.0);

  S wsum = 0;
  for (S w : m2.weights()) wsum += w;
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("mollify preserves linear and constant fields") {
  auto beta = mollify(scalar_linear(-1), 3.0);
  for (S x : {-2.0, -0.3, 0.0, 0.7, 5.0}) CHECK(std::abs(beta(p1(x))[0] + x) < 1e-12);

  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  auto beta2 = mollify(VectorField<S>::linear(rot), 2.0);
  const auto x = p2(0.4, -1.3);
  CHECK((beta2(x) - rot * x).norm() < 1e-12);

  auto c = mollify(VectorField<S>::constant(p2(2.5, -1.0)), 5.0);
  CHECK((c(p2(0.1, 0.2)) - p2(2.5, -1.0)).norm() < 1e-13);
}

TEST_CASE("mollified sign drift") {
  auto beta = mollify(VectorField<S>::sign(1), 1.0);
  CHECK(beta(p1(0.0))[0] == doctest::Approx(0.0).epsilon(1e-15));
  // independent oracle: -(2 F(x) - 1) with F the cumulative profile
  Mollifier<S> m(1);
  boost::math::quadrature::tanh_sinh<S> ts;
  S prev = 1.0;
  S max_err = 0;
  for (int i = -60; i <= 60; ++i) {
    const S x = i / 40.0;
    const S v = beta(p1(x))[0];
    CHECK(std::abs(v) <= 1.0 + 1e-14);
    CHECK(v <= prev + 1e-14);
    prev = v;
    const S lo = std::max(-1.0, std::min(1.0, x));
    const S cdf = x <= -1.0 ? 0.0 : ts.integrate([&](S z) { return m.profile(p1(z)); }, -1.0, lo);
    max_err = std::max(max_err, std::abs(v + (2 * cdf - 1)));
  }
  // 16-point rule on a discontinuous integrand: staircase error bounded by the largest node weight
  CHECK(max_err < 0.2);
  CHECK(beta(p1(1.0))[0] == -1.0);
  CHECK(beta(p1(-1.2))[0] == 1.0);
  // transition layer scales like 1/j
  auto beta4 = mollify(VectorField<S>::sign(1), 4.0);
  CHECK(beta4(p1(0.26))[0] == -1.0);
  CHECK(beta4(p1(0.1))[0] > -1.0);
}

TEST_CASE("mollify preserves dissipativity on samples") {
  const auto pairs = sample_pairs<S>(1, 2.0, 300, 11);
  CHECK(check_dissipative(mollify(cubic(), 2.0), pairs, 1e-12).pass);
  CHECK(check_dissipative(mollify(VectorField<S>::sign(1), 3.0), pairs, 1e-12).pass);
  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  auto f2 = VectorField<S>::linear(rot) + VectorField<S>::sign(2);
  CHECK(check_dissipative(mollify(f2, 2.0), sample_pairs<S>(2, 2.0, 200, 3), 1e-12).pass);
}

TEST_CASE("yosida_resolve closed forms") {
  auto sol = yosida_resolve(scalar_linear(-1), 0.5, p1(3.0));
  CHECK(sol.point[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sol.residual <= 1e-10);
  CHECK_FALSE(sol.graph_filled);

  auto zero = VectorField<S>::constant(p1(0.0));
  CHECK(yosida_resolve(zero, 0.7, p1(-1.25)).point[0] == -1.25);

  // root of y + y^3 = 2
  auto c = yosida_resolve(cubic(), 1.0, p1(2.0));
  CHECK(std::abs(c.point[0] - 1.0) < 1e-10);

  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  const auto x = p2(1.0, -2.0);
  const Point<S> expect = (MatrixX<S>::Identity(2, 2) - 0.5 * rot).partialPivLu().solve(x);
  auto s2 = yosida_resolve(VectorField<S>::linear(rot), 0.5, x);
  CHECK((s2.point - expect).norm() < 1e-10);
}

TEST_CASE("yosida_resolve errors") {
  CHECK_THROWS_AS(yosida_resolve(cubic(), 0.0, p1(1.0)), InvalidInput);
  YosidaOptions tight;
  tight.max_iterations = 1;
  CHECK_THROWS_AS(yosida_resolve(cubic(), 1.0, p1(2.0), tight), ConvergenceError);
  // an expanding 2D field makes Newton stall
  MatrixX<S> expand(2, 2);
  expand << 2, 0, 0, 2;
  try {
    yosida_resolve(VectorField<S>::linear(expand) + VectorField<S>::sign(2), 0.5, p2(0.3, 0.1), tight);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0);
  }
}

TEST_CASE("yosida_resolve on a jump returns the filled-graph resolvent") {
  // sign: y + alpha sign(y) = x has no classical root for |x| < alpha
  auto s = yosida_resolve(VectorField<S>::sign(1), 0.5, p1(0.2));
  CHECK(s.graph_filled);
  CHECK(std::abs(s.point[0]) < 1e-14);
  auto f = yosida_field(VectorField<S>::sign(1), 0.5);
  CHECK(f(p1(0.2))[0] == doctest::Approx(-0.4));
  CHECK(f(p1(2.0))[0] == doctest::Approx(-1.0));
}

TEST_CASE("yosida_field closed forms") {
  for (S alpha : {0.25, 1.0, 3.0}) {
    auto f = yosida_field(scalar_linear(-1), alpha);
    CHECK(f(p1(1.7))[0] == doctest::Approx(-1.7 / (1 + alpha)).epsilon(1e-10));
  }
  CHECK(yosida_field(VectorField<S>::constant(p1(0.0)), 0.3)(p1(4.0))[0] == 0.0);
  auto fc = yosida_field(cubic(), 1.0);
  CHECK(fc(p1(2.0))[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(std::abs(fc(p1(2.0))[0]) <= std::abs(cubic()(p1(2.0))[0]));
}

TEST_CASE("regularized_drift closed forms") {
  auto b1 = regularized_drift(scalar_linear(-1), 1);
  for (S x : {-1.0, 0.5, 2.0}) CHECK(b1(p1(x))[0] == doctest::Approx(-1.5 * x).epsilon(1e-10));
  auto b2 = regularized_drift(VectorField<S>::constant(p1(0.0)), 2);
  CHECK(b2(p1(3.0))[0] == doctest::Approx(-1.5));
  CHECK_THROWS_AS(regularized_drift(cubic(), 0), InvalidInput);

  const auto pairs = sample_pairs<S>(1, 2.0, 100, 2024);
  auto rep = check_dissipative(regularized_drift(cubic(), 4), pairs, 1e-9, 0.25);
  CHECK(rep.pass);
}

TEST_CASE("yosida properties on sampled points") {
  const auto beta = mollify(cubic(), 4.0);
  const S alpha = 0.5;
  const auto pairs = sample_pairs<S>(1, 2.5, 1000, 99);
  const auto f = yosida_field(beta, alpha);
  for (const auto& p : pairs) {
    const auto y1 = yosida_resolve(beta, alpha, p.x).point;
    const auto y2 = yosida_resolve(beta, alpha, Point<S>(p.x + p.h)).point;
    CHECK((y1 - y2).norm() <= p.h.norm() + 1e-8);
    CHECK(f(p.x).norm() <= beta(p.x).norm());
  }
  CHECK(check_dissipative(f, pairs, 1e-10).pass);

  // F_alpha(beta) -> beta as alpha -> 0
  const auto pts = sample_points<S>(1, 2.0, 50, 5);
  S prev = std::numeric_limits<S>::infinity();
  for (S a : {0.4, 0.2, 0.1, 0.05}) {
    const auto fa = yosida_field(beta, a);
    S err = 0;
    for (const auto& x : pts) err = std::max(err, (fa(x) - beta(x)).norm());
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("yosida properties in two dimensions") {
  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  const auto beta = VectorField<S>::linear(rot) + VectorField<S>::polynomial_gradient(2, {{0.25, {4, 0}}, {0.25, {0, 4}}}, true);
  const auto pairs = sample_pairs<S>(2, 2.0, 200, 17);
  const auto f = yosida_field(beta, 0.3);
  for (const auto& p : pairs) {
    const auto y1 = yosida_resolve(beta, 0.3, p.x).point;
    const auto y2 = yosida_resolve(beta, 0.3, Point<S>(p.x + p.h)).point;
    CHECK((y1 - y2).norm() <= p.h.norm() + 1e-8);
    CHECK(f(p.x).norm() <= beta(p.x).norm() + 1e-12);
  }
  CHECK(check_dissipative(f, pairs, 1e-10).pass);
  CHECK(check_dissipative(regularized_drift(beta, 2), sample_pairs<S>(2, 1.5, 40, 4), 1e-8, 0.5).pass);
}
