#ifndef GRADLAB_DRIFT_HPP
#define GRADLAB_DRIFT_HPP

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gradlab/errors.hpp"
#include "gradlab/grid.hpp"

namespace gradlab {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// One monomial c * x_0^e_0 * ... * x_{d-1}^e_{d-1} of a potential P.
template <typename Scalar>
struct Monomial {
  Scalar coefficient;
  std::vector<int> exponents;
};

/**
 * A drift b : R^d -> R^d.
 *
 * The field is an immutable value; copies share the evaluator. Evaluation
 * throws DomainError outside the region where the field is defined
 * (tabulated fields are only defined on their grid box).
 */
template <typename Scalar>
class VectorField {
 public:
  enum class Kind { Linear, PolynomialGradient, Tabulated, Composite };
  using PointType = Point<Scalar>;
  using Evaluator = std::function<PointType(const PointType&)>;

  VectorField() = default;

  VectorField(int dimension, Kind kind, Evaluator eval, bool declared_dissipative,
              std::string description)
      : dimension_(dimension),
        kind_(kind),
        eval_(std::make_shared<const Evaluator>(std::move(eval))),
        declared_dissipative_(declared_dissipative),
        description_(std::move(description)) {}

  /// b(x) = M x. Declared dissipative iff the symmetric part of M is negative semidefinite.
  static VectorField linear(const MatrixX<Scalar>& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw InvalidInput("linear drift needs a square matrix");
    const MatrixX<Scalar> sym = (m + m.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(sym, Eigen::EigenvaluesOnly);
    const bool dissipative = es.eigenvalues().maxCoeff() <= Scalar(0);
    std::ostringstream os;
    os << "linear[" << m.format(Eigen::IOFormat(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "; ")) << "]";
    return VectorField(static_cast<int>(m.rows()), Kind::Linear,
                       [m](const PointType& x) -> PointType { return m * x; }, dissipative,
                       os.str());
  }

  /// b = -grad P with P a polynomial given by its monomials.
  static VectorField polynomial_gradient(int dimension, std::vector<Monomial<Scalar>> terms,
                                         bool declared_dissipative) {
    for (const auto& t : terms)
      if (static_cast<int>(t.exponents.size()) != dimension)
        throw InvalidInput("monomial exponent count does not match dimension");
    std::ostringstream os;
    os << "polynomial_gradient[";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      os << (i ? " + " : "") << terms[i].coefficient;
      for (int e : terms[i].exponents) os << ":" << e;
    }
    os << "]";
    auto eval = [dimension, terms = std::move(terms)](const PointType& x) -> PointType {
      PointType b = PointType::Zero(dimension);
      for (const auto& t : terms) {
        for (int k = 0; k < dimension; ++k) {
          if (t.exponents[k] == 0) continue;
          Scalar d = t.coefficient * Scalar(t.exponents[k]);
          for (int m = 0; m < dimension; ++m) {
            const int e = m == k ? t.exponents[m] - 1 : t.exponents[m];
            for (int p = 0; p < e; ++p) d *= x[m];
          }
          b[k] -= d;
        }
      }
      return b;
    };
    return VectorField(dimension, Kind::PolynomialGradient, std::move(eval),
                       declared_dissipative, os.str());
  }

  /// b = -sign(x) componentwise; dissipative, discontinuous at the coordinate planes.
  static VectorField sign(int dimension) {
    return VectorField(
        dimension, Kind::Composite,
        [](const PointType& x) -> PointType {
          return x.unaryExpr([](Scalar v) {
            return v > Scalar(0) ? Scalar(-1) : (v < Scalar(0) ? Scalar(1) : Scalar(0));
          });
        },
        true, "sign");
  }

  static VectorField constant(const PointType& c) {
    std::ostringstream os;
    os << "constant[" << c.transpose() << "]";
    return VectorField(static_cast<int>(c.size()), Kind::Composite,
                       [c](const PointType&) -> PointType { return c; },
                       c.isZero(Scalar(0)), os.str());
  }

  /**
   * Multilinear interpolation of node values (one row per node, d columns).
   * Nodes holding NaN are not silently filled: any evaluation that needs
   * them returns NaN.
   */
  static VectorField tabulated(const Grid<Scalar>& grid, const MatrixX<Scalar>& values,
                               bool declared_dissipative) {
    if (values.rows() != grid.size() || values.cols() != grid.dimension())
      throw InvalidInput("tabulated drift needs one row of d values per grid node");
    auto eval = [grid, values](const PointType& x) -> PointType {
      const int d = grid.dimension();
      if (x.size() != d) throw InvalidInput("point dimension mismatch");
      const Scalar r = grid.radius();
      const Scalar h = grid.spacing();
      const Scalar slack = Scalar(1e-12) * r;
      std::array<Index, 3> base{0, 0, 0};
      std::array<Scalar, 3> frac{0, 0, 0};
      for (int k = 0; k < d; ++k) {
        if (!(std::abs(x[k]) <= r + slack))
          throw DomainError("tabulated drift evaluated outside its grid box");
        Scalar t = (x[k] + r) / h;
        Index i = static_cast<Index>(std::floor(t));
        i = std::clamp<Index>(i, 0, grid.points_per_axis() - 2);
        Scalar f = t - Scalar(i);
        if (std::abs(f) < Scalar(1e-12)) f = 0;
        if (std::abs(f - Scalar(1)) < Scalar(1e-12)) f = 1;
        base[k] = i;
        frac[k] = std::clamp(f, Scalar(0), Scalar(1));
      }
      PointType out = PointType::Zero(d);
      for (int corner = 0; corner < (1 << d); ++corner) {
        Scalar w(1);
        std::array<Index, 3> idx{0, 0, 0};
        for (int k = 0; k < d; ++k) {
          const bool up = (corner >> k) & 1;
          w *= up ? frac[k] : Scalar(1) - frac[k];
          idx[k] = base[k] + (up ? 1 : 0);
        }
        if (w == Scalar(0)) continue;
        out += w * values.row(grid.node(idx)).transpose();
      }
      return out;
    };
    return VectorField(grid.dimension(), Kind::Tabulated, std::move(eval), declared_dissipative,
                       "tabulated");
  }

  /// Wraps an arbitrary evaluator.
  static VectorField composite(int dimension, Evaluator eval, bool declared_dissipative,
                               std::string description) {
    return VectorField(dimension, Kind::Composite, std::move(eval), declared_dissipative,
                       std::move(description));
  }

  PointType operator()(const PointType& x) const {
    if (!eval_) throw InvalidInput("evaluating an empty vector field");
    return (*eval_)(x);
  }

  int dimension() const { return dimension_; }
  Kind kind() const { return kind_; }
  bool declared_dissipative() const { return declared_dissipative_; }
  const std::string& description() const { return description_; }

  /// Pointwise sum of two fields of equal dimension.
  friend VectorField operator+(const VectorField& a, const VectorField& b) {
    if (a.dimension() != b.dimension()) throw InvalidInput("vector field dimension mismatch");
    return composite(
        a.dimension(), [a, b](const PointType& x) -> PointType { return a(x) + b(x); },
        a.declared_dissipative() && b.declared_dissipative(),
        "(" + a.description() + " + " + b.description() + ")");
  }

  /// Pointwise scaling; stays dissipative for s >= 0.
  friend VectorField operator*(Scalar s, const VectorField& a) {
    std::ostringstream os;
    os << s << "*" << a.description();
    return composite(
        a.dimension(), [s, a](const PointType& x) -> PointType { return s * a(x); },
        a.declared_dissipative() && s >= Scalar(0), os.str());
  }

 private:
  int dimension_ = 0;
  Kind kind_ = Kind::Composite;
  std::shared_ptr<const Evaluator> eval_;
  bool declared_dissipative_ = false;
  std::string description_;
};

// ---------------------------------------------------------------------------
// Dissipativity sampling
// ---------------------------------------------------------------------------

template <typename Scalar>
struct SamplePair {
  Point<Scalar> x;
  Point<Scalar> h;
};

template <typename Scalar>
struct DissipativityReport {
  std::size_t sample_count = 0;
  /// max over pairs of (b(x+h) - b(x), h) + strong_constant * |h|^2
  Scalar max_inner_product = -std::numeric_limits<Scalar>::infinity();
  SamplePair<Scalar> witness;
  Scalar tolerance = 0;
  bool pass = false;
};

/// Pairs (x, y - x) with x, y uniform in [-radius, radius]^d.
template <typename Scalar>
std::vector<SamplePair<Scalar>> sample_pairs(int dimension, Scalar radius, std::size_t count,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-static_cast<double>(radius),
                                           static_cast<double>(radius));
  std::vector<SamplePair<Scalar>> pairs;
  pairs.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Point<Scalar> x(dimension), y(dimension);
    for (int k = 0; k < dimension; ++k) x[k] = Scalar(u(rng));
    for (int k = 0; k < dimension; ++k) y[k] = Scalar(u(rng));
    pairs.push_back({x, y - x});
  }
  return pairs;
}

/// Points uniform in [-radius, radius]^d.
template <typename Scalar>
std::vector<Point<Scalar>> sample_points(int dimension, Scalar radius, std::size_t count,
                                         std::uint64_t seed) {
  std::vector<Point<Scalar>> pts;
  for (auto& p : sample_pairs<Scalar>(dimension, radius, count, seed)) pts.push_back(p.x);
  return pts;
}

/**
 * Exact maximum of (b(x+h) - b(x), h) + strong_constant |h|^2 over the given
 * pairs. strong_constant = 0 checks plain dissipativity; alpha > 0 checks
 * strong dissipativity with constant alpha.
 */
template <typename Scalar>
DissipativityReport<Scalar> check_dissipative(const VectorField<Scalar>& field,
                                              const std::vector<SamplePair<Scalar>>& pairs,
                                              Scalar tolerance, Scalar strong_constant = 0) {
  if (pairs.empty()) throw InvalidInput("dissipativity check needs at least one sample pair");
  if (tolerance < Scalar(0)) throw InvalidInput("dissipativity tolerance must be nonnegative");
  DissipativityReport<Scalar> rep;
  rep.sample_count = pairs.size();
  rep.tolerance = tolerance;
  for (const auto& p : pairs) {
    const Scalar ip = (field(p.x + p.h) - field(p.x)).dot(p.h) + strong_constant * p.h.squaredNorm();
    if (ip > rep.max_inner_product || rep.witness.x.size() == 0) {
      rep.max_inner_product = ip;
      rep.witness = p;
    }
  }
  rep.pass = rep.max_inner_product <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Mollifier
// ---------------------------------------------------------------------------

/**
 * The bump exp(-1/(1-|z|^2)) on the unit ball, normalized to unit mass, with
 * a tensor Gauss-Legendre rule over [-1,1]^d restricted to the ball. The
 * discrete rule weights are renormalized to sum to one so that constants
 * are reproduced exactly; nodes are symmetric so linear maps are too.
 */
template <typename Scalar>
class Mollifier {
 public:
  static constexpr int kOrder = 16;

  explicit Mollifier(int dimension) : dimension_(dimension) {
    if (dimension < 1 || dimension > 3) throw InvalidInput("mollifier dimension must be 1..3");
    normalization_ = Scalar(1) / unnormalized_mass(dimension);
    build_rule();
  }

  int dimension() const { return dimension_; }

  /// sigma(z), unit mass.
  Scalar profile(const Point<Scalar>& z) const { return normalization_ * bump(z.squaredNorm()); }

  /// sigma_j(z) = j^d sigma(j z): support radius 1/j.
  Scalar scaled(const Point<Scalar>& z, Scalar j) const {
    return std::pow(j, dimension_) * profile(j * z);
  }

  const std::vector<Point<Scalar>>& nodes() const { return nodes_; }
  const std::vector<Scalar>& weights() const { return weights_; }

 private:
  static Scalar bump(Scalar r2) {
    if (r2 >= Scalar(1)) return Scalar(0);
    return std::exp(-Scalar(1) / (Scalar(1) - r2));
  }

  // |S^{d-1}| * int_0^1 r^{d-1} bump(r^2) dr
  static Scalar unnormalized_mass(int d) {
    using boost::math::quadrature::gauss_kronrod;
    auto radial = [d](Scalar r) { return std::pow(r, d - 1) * bump(r * r); };
    const Scalar integral = gauss_kronrod<Scalar, 61>::integrate(radial, Scalar(0), Scalar(1), 15,
                                                                 Scalar(1e-15));
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar sphere = d == 1 ? Scalar(2) : (d == 2 ? Scalar(2) * pi : Scalar(4) * pi);
    return sphere * integral;
  }

  void build_rule() {
    using Rule = boost::math::quadrature::gauss<Scalar, kOrder>;
    std::vector<Scalar> x1, w1;
    const auto& a = Rule::abscissa();
    const auto& w = Rule::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      x1.push_back(a[i]);
      w1.push_back(w[i]);
      if (a[i] != Scalar(0)) {
        x1.push_back(-a[i]);
        w1.push_back(w[i]);
      }
    }
    const std::size_t m = x1.size();
    std::size_t total = 1;
    for (int k = 0; k < dimension_; ++k) total *= m;
    Scalar sum(0);
    for (std::size_t q = 0; q < total; ++q) {
      Point<Scalar> z(dimension_);
      Scalar wt(1);
      std::size_t rem = q;
      for (int k = 0; k < dimension_; ++k) {
        z[k] = x1[rem % m];
        wt *= w1[rem % m];
        rem /= m;
      }
      const Scalar s = bump(z.squaredNorm());
      if (s == Scalar(0)) continue;
      nodes_.push_back(z);
      weights_.push_back(wt * s);
      sum += wt * s;
    }
    for (auto& v : weights_) v /= sum;
  }

  int dimension_;
  Scalar normalization_;
  std::vector<Point<Scalar>> nodes_;
  std::vector<Scalar> weights_;
};

/// beta_j = b * sigma_j, evaluated by the fixed tensor quadrature of Mollifier.
template <typename Scalar>
VectorField<Scalar> mollify(const VectorField<Scalar>& field, Scalar j) {
  if (!(j > Scalar(0))) throw InvalidInput("mollifier width index must be positive");
  auto rule = std::make_shared<const Mollifier<Scalar>>(field.dimension());
  std::ostringstream os;
  os << "mollify(" << field.description() << ", j=" << j << ")";
  const int d = field.dimension();
  return VectorField<Scalar>::composite(
      d,
      [field, rule, j, d](const Point<Scalar>& x) -> Point<Scalar> {
        Point<Scalar> acc = Point<Scalar>::Zero(d);
        const auto& nodes = rule->nodes();
        const auto& weights = rule->weights();
        for (std::size_t q = 0; q < nodes.size(); ++q)
          acc += weights[q] * field(x - nodes[q] / j);
        return acc;
      },
      field.declared_dissipative(), os.str());
}

// ---------------------------------------------------------------------------
// Yosida approximation
// ---------------------------------------------------------------------------

template <typename Scalar>
struct YosidaSolution {
  Point<Scalar> point;
  /// |y - alpha beta(y) - x|
  Scalar residual = 0;
  int iterations = 0;
  /// True when x falls on a jump of a discontinuous beta: y is then the
  /// resolvent of the monotone graph obtained by filling the jump, and the
  /// pointwise residual does not vanish.
  bool graph_filled = false;
};

struct YosidaOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
};

namespace detail {

template <typename Scalar>
YosidaSolution<Scalar> yosida_resolve_1d(const VectorField<Scalar>& beta, Scalar alpha,
                                         const Point<Scalar>& x, const YosidaOptions& opt) {
  const Scalar tol = Scalar(opt.tolerance);
  const Scalar x0 = x[0];
  auto g = [&](Scalar y) {
    Point<Scalar> p(1);
    p[0] = y;
    return y - alpha * beta(p)[0] - x0;
  };
  YosidaSolution<Scalar> sol;
  sol.point = x;
  const Scalar g0 = g(x0);
  if (std::abs(g0) <= tol) {
    sol.residual = std::abs(g0);
    return sol;
  }
  // The root satisfies |y - x| <= alpha |beta(x)| = |g(x)|.
  const Scalar reach = std::abs(g0);
  Scalar lo = x0 - reach - tol, hi = x0 + reach + tol;
  Scalar glo = g(lo), ghi = g(hi);
  for (int expand = 0; (glo > 0 || ghi < 0) && expand < 60; ++expand) {
    const Scalar w = hi - lo;
    if (glo > 0) {
      lo -= w;
      glo = g(lo);
    }
    if (ghi < 0) {
      hi += w;
      ghi = g(hi);
    }
  }
  if (glo > 0 || ghi < 0)
    throw ConvergenceError("yosida resolve could not bracket the root", static_cast<double>(reach));

  Scalar y = x0, gy = g0;
  Scalar width_before = hi - lo;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    sol.iterations = it;
    const Scalar delta = std::sqrt(std::numeric_limits<Scalar>::epsilon()) *
                         std::max(Scalar(1), std::abs(y));
    const Scalar slope = (g(y + delta) - gy) / delta;
    Scalar cand = slope > Scalar(0) ? y - gy / slope : (lo + hi) / 2;
    if (!(cand > lo && cand < hi) || (it % 3 == 0 && hi - lo > width_before / 2))
      cand = (lo + hi) / 2;
    if (it % 3 == 0) width_before = hi - lo;
    y = cand;
    gy = g(y);
    if (std::abs(gy) <= tol) {
      sol.point[0] = y;
      sol.residual = std::abs(gy);
      return sol;
    }
    if (gy < 0) {
      lo = y;
      glo = gy;
    } else {
      hi = y;
      ghi = gy;
    }
    const Scalar floor_width =
        Scalar(8) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(y));
    if (hi - lo <= floor_width) {
      sol.point[0] = (lo + hi) / 2;
      sol.residual = std::min(std::abs(glo), std::abs(ghi));
      sol.graph_filled = true;
      return sol;
    }
  }
  throw ConvergenceError("yosida resolve hit the iteration cap", static_cast<double>(std::abs(gy)));
}

template <typename Scalar>
YosidaSolution<Scalar> yosida_resolve_nd(const VectorField<Scalar>& beta, Scalar alpha,
                                         const Point<Scalar>& x, const YosidaOptions& opt) {
  const int d = static_cast<int>(x.size());
  const Scalar tol = Scalar(opt.tolerance);
  auto g = [&](const Point<Scalar>& y) -> Point<Scalar> { return y - alpha * beta(y) - x; };
  YosidaSolution<Scalar> sol;
  Point<Scalar> y = x;
  Point<Scalar> gy = g(y);
  Scalar norm = gy.norm();
  for (int it = 0; it <= opt.max_iterations; ++it) {
    sol.iterations = it;
    if (norm <= tol) {
      sol.point = y;
      sol.residual = norm;
      return sol;
    }
    if (it == opt.max_iterations) break;
    MatrixX<Scalar> jac(d, d);
    for (int k = 0; k < d; ++k) {
      const Scalar delta = std::sqrt(std::numeric_limits<Scalar>::epsilon()) *
                           std::max(Scalar(1), std::abs(y[k]));
      Point<Scalar> yp = y;
      yp[k] += delta;
      jac.col(k) = (g(yp) - gy) / delta;
    }
    const Point<Scalar> step = jac.partialPivLu().solve(-gy);
    Scalar t(1);
    bool accepted = false;
    while (t > Scalar(1e-12)) {
      const Point<Scalar> yt = y + t * step;
      const Point<Scalar> gt = g(yt);
      if (gt.norm() < (Scalar(1) - Scalar(1e-4) * t) * norm) {
        y = yt;
        gy = gt;
        norm = gt.norm();
        accepted = true;
        break;
      }
      t /= 2;
    }
    if (!accepted) {
      const Scalar floor_res = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                               std::max(Scalar(1), y.norm() + x.norm());
      if (norm <= floor_res) {
        sol.point = y;
        sol.residual = norm;
        return sol;
      }
      throw ConvergenceError("yosida Newton line search stalled", static_cast<double>(norm));
    }
  }
  throw ConvergenceError("yosida resolve hit the iteration cap", static_cast<double>(norm));
}

}  // namespace detail

/// Solves y - alpha beta(y) = x, i.e. y = (I - alpha beta)^{-1} x.
template <typename Scalar>
YosidaSolution<Scalar> yosida_resolve(const VectorField<Scalar>& beta, Scalar alpha,
                                      const Point<Scalar>& x, const YosidaOptions& opt = {}) {
  if (!(alpha > Scalar(0))) throw InvalidInput("yosida parameter alpha must be positive");
  if (x.size() != beta.dimension()) throw InvalidInput("point dimension mismatch");
  if (beta.dimension() == 1) return detail::yosida_resolve_1d(beta, alpha, x, opt);
  return detail::yosida_resolve_nd(beta, alpha, x, opt);
}

/// F_alpha(beta) = beta o (I - alpha beta)^{-1}.
template <typename Scalar>
VectorField<Scalar> yosida_field(const VectorField<Scalar>& beta, Scalar alpha,
                                 const YosidaOptions& opt = {}) {
  if (!(alpha > Scalar(0))) throw InvalidInput("yosida parameter alpha must be positive");
  std::ostringstream os;
  os << "yosida(" << beta.description() << ", alpha=" << alpha << ")";
  return VectorField<Scalar>::composite(
      beta.dimension(),
      [beta, alpha, opt](const Point<Scalar>& x) -> Point<Scalar> {
        const auto sol = yosida_resolve(beta, alpha, x, opt);
        if (sol.graph_filled) return (sol.point - x) / alpha;
        return beta(sol.point);
      },
      beta.declared_dissipative(), os.str());
}

/// b_k = F_{1/k}(b * sigma_k) - (1/k) I: smooth, Lipschitz, strongly dissipative with constant 1/k.
template <typename Scalar>
VectorField<Scalar> regularized_drift(const VectorField<Scalar>& b, int k,
                                      const YosidaOptions& opt = {}) {
  if (k < 1) throw InvalidInput("regularization index k must be a positive integer");
  const Scalar inv_k = Scalar(1) / Scalar(k);
  const auto smoothed = yosida_field(mollify(b, Scalar(k)), inv_k, opt);
  std::ostringstream os;
  os << "regularized(" << b.description() << ", k=" << k << ")";
  return VectorField<Scalar>::composite(
      b.dimension(),
      [smoothed, inv_k](const Point<Scalar>& x) -> Point<Scalar> { return smoothed(x) - inv_k * x; },
      b.declared_dissipative(), os.str());
}

}  // namespace gradlab

#endif  // GRADLAB_DRIFT_HPP
