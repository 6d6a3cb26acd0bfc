#include "doctest.h"

#include <random>
#include <sstream>

#include "gradlab/generator.hpp"
#include "gradlab/gradient.hpp"
#include "gradlab/lyapunov.hpp"
#include "gradlab/solver.hpp"

using namespace gradlab;
using S = double;

namespace {

VectorField<S> linear_field(const MatrixX<S>& m) { return VectorField<S>::linear(m); }

VectorField<S> ou(int d) { return linear_field(-MatrixX<S>::Identity(d, d)); }

S entry(const SparseMatrix<S>& m, Index i, Index j) { return m.coeff(i, j); }

}  // namespace

TEST_CASE("build_grid examples") {
  auto g = build_grid<S>(1, 1.0, 3);
  CHECK(g.size() == 3);
  CHECK(g.spacing() == 1.0);
  CHECK(g.point(0)[0] == -1.0);
  CHECK(g.point(1)[0] == 0.0);
  CHECK(g.point(2)[0] == 1.0);

  auto g2 = build_grid<S>(2, 2.0, 5);
  CHECK(g2.size() == 25);
  CHECK(g2.spacing() == 1.0);

  auto g3 = build_grid<S>(1, 1.5, 7);
  CHECK(g3.spacing() == 0.5);
  CHECK(g3.point(4)[0] == 0.5);

  CHECK_THROWS_AS(build_grid<S>(1, 1.0, 4), InvalidInput);
  CHECK_THROWS_AS(build_grid<S>(1, 1.0, 1), InvalidInput);
  CHECK_THROWS_AS(build_grid<S>(4, 1.0, 5), InvalidInput);
  CHECK_THROWS_AS(build_grid<S>(2, -1.0, 5), InvalidInput);
}

TEST_CASE("grid indexing is row-major with exact boundary coordinates") {
  Grid<S> g(3, 0.7, 9);
  for (Index node : {Index(0), Index(17), Index(400), g.size() - 1}) {
    const auto idx = g.multi_index(node);
    CHECK(g.node(idx) == node);
    CHECK(node == (idx[0] * 9 + idx[1]) * 9 + idx[2]);
  }
  CHECK(g.point(g.size() - 1)[2] == 0.7);
  CHECK(g.point(0)[0] == -0.7);
  CHECK(g.point(g.node({4, 4, 4})).norm() == 0.0);
  // second node differs only in the last coordinate
  CHECK(g.point(1)[0] == g.point(0)[0]);
  CHECK(g.point(1)[2] > g.point(0)[2]);

  for (Index i = 0; i < g.size(); ++i) {
    const auto idx = g.multi_index(i);
    bool edge = false, inner = true;
    for (int k = 0; k < 3; ++k) {
      edge = edge || idx[k] == 0 || idx[k] == 8;
      inner = inner && std::abs(idx[k] - 4) <= 2;
    }
    CHECK(g.is_boundary(i) == edge);
    CHECK(g.in_inner_box(i) == inner);
  }
}

TEST_CASE("DiffusionMatrix validation and bounds") {
  MatrixX<S> a(2, 2);
  a << 2, 0.5, 0.5, 1;
  DiffusionMatrix<S> dm(a);
  Eigen::SelfAdjointEigenSolver<MatrixX<S>> es(a);
  CHECK(dm.min_eigenvalue() == doctest::Approx(es.eigenvalues()[0]));
  CHECK(dm.bound() == doctest::Approx(es.eigenvalues()[1] + 1 / es.eigenvalues()[0]));
  CHECK_FALSE(dm.is_diagonal());

  MatrixX<S> asym = a;
  asym(0, 1) += 1e-15;
  CHECK_THROWS_AS(DiffusionMatrix<S>{asym}, InvalidInput);
  MatrixX<S> indef(2, 2);
  indef << 1, 2, 2, 1;
  CHECK_THROWS_AS(DiffusionMatrix<S>{indef}, InvalidInput);

  CHECK(uniform_bound<S>({DiffusionMatrix<S>::identity(2), dm}) == doctest::Approx(dm.bound()));
}

TEST_CASE("1D Laplacian stencil with mirror boundary") {
  Grid<S> g(1, 2.0, 5);
  auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(1), VectorField<S>::constant(Point<S>::Zero(1)));
  const auto& m = gen.matrix;
  CHECK(entry(m, 2, 1) == 1.0);
  CHECK(entry(m, 2, 2) == -2.0);
  CHECK(entry(m, 2, 3) == 1.0);
  CHECK(entry(m, 0, 0) == -2.0);
  CHECK(entry(m, 0, 1) == 2.0);
  CHECK(entry(m, 4, 3) == 2.0);
  const NodeValues<S> sums = m * NodeValues<S>::Ones(5);
  CHECK(sums.cwiseAbs().maxCoeff() == 0.0);
  CHECK(gen.monotone);
}

TEST_CASE("upwind drift stencil") {
  Grid<S> g(1, 2.0, 5);
  Point<S> c(1);
  c << 2.0;
  auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(1), VectorField<S>::constant(c));
  CHECK(entry(gen.matrix, 2, 3) == 3.0);
  CHECK(entry(gen.matrix, 2, 1) == 1.0);
  CHECK(entry(gen.matrix, 2, 2) == -4.0);

  c << -2.0;
  auto left = assemble_generator(g, DiffusionMatrix<S>::identity(1), VectorField<S>::constant(c));
  CHECK(entry(left.matrix, 2, 1) == 3.0);
  CHECK(entry(left.matrix, 2, 3) == 1.0);
}

TEST_CASE("2D OU generator is monotone and conservative") {
  Grid<S> g(2, 2.0, 5);
  auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(2), ou(2));
  CHECK(gen.monotone);
  const NodeValues<S> sums = gen.matrix * NodeValues<S>::Ones(25);
  CHECK(sums.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cross-derivative stencil and monotonicity flag") {
  Grid<S> g(2, 2.0, 5);
  MatrixX<S> a(2, 2);
  a << 1, 0.9, 0.9, 1;
  auto gen = assemble_generator(g, DiffusionMatrix<S>{a}, VectorField<S>::constant(Point<S>::Zero(2)));
  const Index c = g.node({2, 2, 0});
  CHECK(entry(gen.matrix, c, g.node({3, 3, 0})) == doctest::Approx(0.45));
  CHECK(entry(gen.matrix, c, g.node({1, 3, 0})) == doctest::Approx(-0.45));
  CHECK_FALSE(gen.monotone);

  bool scan = true;
  for (Index k = 0; k < gen.matrix.outerSize(); ++k)
    for (SparseMatrix<S>::InnerIterator it(gen.matrix, k); it; ++it)
      if (it.row() != it.col() && it.value() < 0) scan = false;
  CHECK(gen.monotone == scan);

  // weak coupling keeps every off-diagonal entry nonnegative on this grid
  a << 1, 0.0, 0.0, 2;
  CHECK(assemble_generator(g, DiffusionMatrix<S>{a}, ou(2)).monotone);
}

TEST_CASE("stencil is exact on quadratics without drift and on linears with drift") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    MatrixX<S> q(d, d), m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        q(i, j) = u(rng);
        m(i, j) = u(rng);
      }
    MatrixX<S> a = q * q.transpose() + MatrixX<S>::Identity(d, d);
    a = (0.5 * (a + a.transpose())).eval();
    Point<S> c(d);
    for (int i = 0; i < d; ++i) c[i] = u(rng);
    Grid<S> g(d, 1.3, d == 3 ? 7 : 9);

    // u(x) = x^T Q x with Q symmetric: L u = 2 tr(A Q)
    const MatrixX<S> qs = 0.5 * (q + q.transpose());
    const auto quad = g.sample([&](const Point<S>& x) { return x.dot(qs * x); });
    auto gen0 = assemble_generator(g, DiffusionMatrix<S>{a}, VectorField<S>::constant(Point<S>::Zero(d)));
    const NodeValues<S> l0 = gen0.matrix * quad;
    const S expect = 2 * (a * qs).trace();
    // linear u: L u = b . c
    const auto lin = g.sample([&](const Point<S>& x) { return c.dot(x); });
    auto gen1 = assemble_generator(g, DiffusionMatrix<S>{a}, linear_field(m));
    const NodeValues<S> l1 = gen1.matrix * lin;
    for (Index i = 0; i < g.size(); ++i) {
      if (g.is_boundary(i)) continue;
      // diagonal neighbours of near-boundary nodes stay inside for i not on the boundary
      CHECK(l0[i] == doctest::Approx(expect).epsilon(1e-9));
      CHECK(l1[i] == doctest::Approx((m * g.point(i)).dot(c)).epsilon(1e-9));
    }
  }
}

TEST_CASE("reflecting generators conserve constants; absorbing freezes the boundary") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int d = 1; d <= 3; ++d) {
    MatrixX<S> m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = u(rng);
    Grid<S> g(d, 2.0, d == 3 ? 7 : 11);
    auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(d), linear_field(m));
    const NodeValues<S> l1 = gen.matrix * NodeValues<S>::Ones(g.size());
    CHECK(l1.cwiseAbs().maxCoeff() <= 1e-12 * gen.matrix.diagonal().cwiseAbs().maxCoeff());
    CHECK(gen.monotone);

    auto abs = assemble_generator(g, DiffusionMatrix<S>::identity(d), linear_field(m), BoundaryCondition::Absorbing);
    for (Index i = 0; i < g.size(); ++i)
      if (g.is_boundary(i)) CHECK(abs.matrix.row(i).norm() == 0.0);
  }
}

TEST_CASE("implicit Euler step keeps nonnegative data nonnegative") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  Grid<S> g(2, 3.0, 21);
  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  auto gen = assemble_generator(g, DiffusionMatrix<S>::identity(2), linear_field(rot));
  for (S tau : {1e-3, 0.1, 1.0, 50.0}) {
    EulerSemigroup<S> step(gen, tau);
    for (int s = 0; s < 3; ++s) {
      NodeValues<S> f(g.size());
      for (Index i = 0; i < g.size(); ++i) f[i] = u(rng) < 0.1 ? u(rng) : 0.0;
      CHECK(step.advance(f).minCoeff() >= -1e-14);
    }
  }
}

TEST_CASE("drift that cannot be evaluated at a node is a domain error") {
  Grid<S> small(1, 1.0, 5), big(1, 2.0, 9);
  MatrixX<S> vals = MatrixX<S>::Zero(5, 1);
  auto tab = VectorField<S>::tabulated(small, vals, true);
  CHECK_THROWS_AS(assemble_generator(big, DiffusionMatrix<S>::identity(1), tab), DomainError);
  auto nan = VectorField<S>::composite(
      1, [](const Point<S>& x) { return Point<S>::Constant(1, x[0] > 0.5 ? NAN : 0.0); }, false, "nan");
  CHECK_THROWS_AS(assemble_generator(big, DiffusionMatrix<S>::identity(1), nan), DomainError);
  CHECK_THROWS_AS(assemble_generator(big, DiffusionMatrix<S>::identity(2), ou(2)), InvalidInput);
}

TEST_CASE("COO round trip") {
  Grid<S> g(2, 1.0, 7);
  MatrixX<S> a(2, 2);
  a << 1.3, 0.2, 0.2, 0.7;
  MatrixX<S> rot(2, 2);
  rot << -1, -1, 1, -1;
  auto gen = assemble_generator(g, DiffusionMatrix<S>{a}, linear_field(rot));
  std::stringstream ss;
  write_coo(ss, gen.matrix);
  const auto text = ss.str();
  CHECK(text.rfind("node_i,node_j,value\n", 0) == 0);
  auto back = read_coo<S>(ss, g.size(), g.size());
  CHECK(SparseMatrix<S>(back - gen.matrix).norm() == 0.0);

  std::stringstream again;
  write_coo(again, back);
  CHECK(again.str() == text);

  std::stringstream bad("node_i,node_j,value\n0;1;2\n");
  CHECK_THROWS_AS(read_coo<S>(bad, 3, 3), InvalidInput);
  std::stringstream out_of_range("node_i,node_j,value\n5,0,1\n");
  CHECK_THROWS_AS(read_coo<S>(out_of_range, 3, 3), InvalidInput);
}

TEST_CASE("discrete_gradient examples") {
  Grid<S> g(1, 2.0, 9);
  auto c = discrete_gradient(g, NodeValues<S>::Constant(9, 3.5));
  CHECK(c.norm.cwiseAbs().maxCoeff() == 0.0);

  auto lin = discrete_gradient(g, g.sample([](const Point<S>& x) { return x[0]; }));
  for (Index i = 0; i < 9; ++i) CHECK(lin.vectors(i, 0) == doctest::Approx(1.0));

  Grid<S> gq(1, 1.5, 7);  // h = 0.5, node 5 at x = 1
  auto q = discrete_gradient(gq, gq.sample([](const Point<S>& x) { return x[0] * x[0]; }));
  CHECK(gq.point(5)[0] == 1.0);
  CHECK(q.vectors(5, 0) == doctest::Approx(2.0));

  Grid<S> g2(2, 1.0, 5);
  auto v = discrete_gradient(g2, g2.sample([](const Point<S>& x) { return 3 * x[0] - 4 * x[1]; }));
  for (Index i = 0; i < g2.size(); ++i) CHECK(v.norm[i] == doctest::Approx(5.0));
  CHECK_THROWS_AS(discrete_gradient(g2, NodeValues<S>::Zero(3)), InvalidInput);
}

TEST_CASE("Lyapunov generator value matches finite differences") {
  MatrixX<S> a(2, 2);
  a << 1.5, 0.3, 0.3, 0.8;
  DiffusionMatrix<S> dm(a);
  MatrixX<S> rot(2, 2);
  rot << -1, -2, 2, -1;
  auto b = linear_field(rot);
  for (int m : {1, 2, 3}) {
    Lyapunov<S> v(m);
    Point<S> x(2);
    x << 0.7, -0.4;
    const S e = 1e-4;
    MatrixX<S> hess(2, 2);
    Point<S> grad(2);
    for (int i = 0; i < 2; ++i) {
      Point<S> ei = Point<S>::Unit(2, i) * e;
      grad[i] = (v.value(x + ei) - v.value(x - ei)) / (2 * e);
      for (int j = 0; j < 2; ++j) {
        Point<S> ej = Point<S>::Unit(2, j) * e;
        hess(i, j) = (v.value(x + ei + ej) - v.value(x + ei - ej) - v.value(x - ei + ej) +
                      v.value(x - ei - ej)) / (4 * e * e);
      }
    }
    const S fd = (a * hess).trace() + b(x).dot(grad);
    CHECK(v.generator_value(dm, b, x) == doctest::Approx(fd).epsilon(1e-6));
    CHECK(v.value(x) >= 0);
  }
  CHECK_THROWS_AS(Lyapunov<S>(0), InvalidInput);
}

TEST_CASE("suggest_truncation examples") {
  const auto a1 = DiffusionMatrix<S>::identity(1);
  Lyapunov<S> v;
  CHECK(suggest_truncation(v, a1, ou(1), 1.0) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-12));
  auto cubic = VectorField<S>::polynomial_gradient(1, {{0.25, {4}}}, true);
  CHECK(suggest_truncation(v, a1, cubic, 2.0) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-12));
  CHECK_THROWS_AS(suggest_truncation(v, a1, linear_field(MatrixX<S>::Identity(1, 1)), 1.0), LyapunovFailure);
  CHECK_THROWS_AS(suggest_truncation(v, a1, ou(1), 0.0), InvalidInput);
  CHECK(default_truncation_radius(v, a1, ou(1)) == doctest::Approx(1.5 * std::sqrt(1.5)));

  // 2D OU: LV = 4 - 2|x|^2, radial so every ray agrees
  CHECK(suggest_truncation(v, DiffusionMatrix<S>::identity(2), ou(2), 1.0) ==
        doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
}
