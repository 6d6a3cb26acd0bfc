#ifndef GRADLAB_TEST_FUNCTIONS_HPP
#define GRADLAB_TEST_FUNCTIONS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>

#include "gradlab/grid.hpp"

namespace gradlab {

/// Named scalar initial datum f : R^d -> R.
template <typename Scalar>
struct TestFunction {
  enum class Family { Constant, Linear, Sine, Bump, ClippedLinear };

  Family family = Family::Constant;
  std::string name;
  Point<Scalar> slope;
  Scalar parameter = 0;
  std::function<Scalar(const Point<Scalar>&)> eval;

  Scalar operator()(const Point<Scalar>& x) const { return eval(x); }
  NodeValues<Scalar> on(const Grid<Scalar>& grid) const { return grid.sample(eval); }

  static TestFunction constant(int d, Scalar c) {
    TestFunction t;
    t.family = Family::Constant;
    t.name = "constant";
    t.slope = Point<Scalar>::Zero(d);
    t.parameter = c;
    t.eval = [c](const Point<Scalar>&) { return c; };
    return t;
  }

  /// <a, x>
  static TestFunction linear(const Point<Scalar>& a) {
    TestFunction t;
    t.family = Family::Linear;
    t.name = "linear";
    t.slope = a;
    t.eval = [a](const Point<Scalar>& x) { return a.dot(x); };
    return t;
  }

  /// sin(<a, x>)
  static TestFunction sine(const Point<Scalar>& a) {
    TestFunction t;
    t.family = Family::Sine;
    t.name = "sine";
    t.slope = a;
    t.eval = [a](const Point<Scalar>& x) { return std::sin(a.dot(x)); };
    return t;
  }

  /// exp(-1/(1 - |x - c|^2 / r^2)) inside the ball, 0 outside
  static TestFunction bump(const Point<Scalar>& center, Scalar radius) {
    TestFunction t;
    t.family = Family::Bump;
    t.name = "bump";
    t.slope = center;
    t.parameter = radius;
    t.eval = [center, radius](const Point<Scalar>& x) {
      const Scalar q = (x - center).squaredNorm() / (radius * radius);
      return q < Scalar(1) ? std::exp(-Scalar(1) / (Scalar(1) - q)) : Scalar(0);
    };
    return t;
  }

  /// <a, x> zeta_n(x) with the cutoff zeta_n = clamp(n + 1 - |x|, 0, 1)
  static TestFunction clipped_linear(const Point<Scalar>& a, Scalar n) {
    TestFunction t;
    t.family = Family::ClippedLinear;
    t.name = "clipped_linear";
    t.slope = a;
    t.parameter = n;
    t.eval = [a, n](const Point<Scalar>& x) {
      const Scalar zeta = std::clamp(n + Scalar(1) - x.norm(), Scalar(0), Scalar(1));
      return a.dot(x) * zeta;
    };
    return t;
  }
};

}  // namespace gradlab

#endif  // GRADLAB_TEST_FUNCTIONS_HPP
