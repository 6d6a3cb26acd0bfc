#ifndef GRADLAB_LYAPUNOV_HPP
#define GRADLAB_LYAPUNOV_HPP

#include <cmath>
#include <random>
#include <vector>

#include "gradlab/drift.hpp"
#include "gradlab/generator.hpp"

namespace gradlab {

/// V(x) = |x|^{2m}, m >= 1.
template <typename Scalar>
class Lyapunov {
 public:
  explicit Lyapunov(int power = 1) : power_(power) {
    if (power < 1) throw InvalidInput("Lyapunov power m must be >= 1");
  }

  int power() const { return power_; }

  Scalar value(const Point<Scalar>& x) const { return std::pow(x.squaredNorm(), power_); }

  /// (L V)(x) = tr(A D^2 V) + b . grad V, in closed form.
  Scalar generator_value(const DiffusionMatrix<Scalar>& a, const VectorField<Scalar>& b,
                         const Point<Scalar>& x) const {
    const Scalar m(power_);
    const Scalar r2 = x.squaredNorm();
    const Scalar c1 = Scalar(2) * m * std::pow(r2, power_ - 1);
    Scalar lv = c1 * (a.matrix().trace() + b(x).dot(x));
    if (power_ > 1) {
      const Scalar c2 = Scalar(2) * m * (Scalar(2) * m - Scalar(2)) * std::pow(r2, power_ - 2);
      lv += c2 * x.dot(a.matrix() * x);
    }
    return lv;
  }

 private:
  int power_;
};

struct TruncationOptions {
  double cap = 100.0;
  int lattice_steps = 10000;
  int random_directions = 64;
  std::uint64_t seed = 0x5eedULL;
};

/**
 * Smallest R on a radial search lattice (refined by bisection at the last
 * crossing) such that LV <= -theta at every sampled point with |x| >= R.
 * Rays: +-axes and +-diagonals, plus seeded random directions when d >= 2.
 */
template <typename Scalar>
Scalar suggest_truncation(const Lyapunov<Scalar>& v, const DiffusionMatrix<Scalar>& a,
                          const VectorField<Scalar>& b, Scalar theta,
                          const TruncationOptions& opt = {}) {
  if (!(theta > Scalar(0))) throw InvalidInput("truncation threshold theta must be positive");
  const int d = a.dimension();
  if (b.dimension() != d) throw InvalidInput("drift dimension mismatch");

  std::vector<Point<Scalar>> dirs;
  for (int k = 0; k < d; ++k)
    for (int s : {-1, 1}) {
      Point<Scalar> e = Point<Scalar>::Zero(d);
      e[k] = Scalar(s);
      dirs.push_back(e);
    }
  if (d >= 2) {
    for (int mask = 0; mask < (1 << d); ++mask) {
      Point<Scalar> e(d);
      for (int k = 0; k < d; ++k) e[k] = (mask >> k) & 1 ? Scalar(1) : Scalar(-1);
      dirs.push_back(e.normalized());
    }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    for (int r = 0; r < opt.random_directions; ++r) {
      Point<Scalar> e(d);
      for (int k = 0; k < d; ++k) e[k] = Scalar(nd(rng));
      dirs.push_back(e.normalized());
    }
  }

  const Scalar cap(opt.cap);
  const Scalar step = cap / Scalar(opt.lattice_steps);
  auto excess = [&](const Point<Scalar>& e, Scalar r) {
    return v.generator_value(a, b, Point<Scalar>(r * e)) + theta;
  };
  Scalar radius(0);
  for (const auto& e : dirs) {
    int last_bad = -1;
    for (int m = 0; m <= opt.lattice_steps; ++m)
      if (excess(e, m * step) > Scalar(0)) last_bad = m;
    if (last_bad == opt.lattice_steps)
      throw LyapunovFailure("LV stays above -theta out to the search cap; the Lyapunov "
                            "condition fails for this V");
    if (last_bad < 0) continue;
    Scalar lo = last_bad * step, hi = (last_bad + 1) * step;
    for (int it = 0; it < 80 && hi - lo > std::numeric_limits<Scalar>::epsilon() * hi; ++it) {
      const Scalar mid = (lo + hi) / 2;
      if (excess(e, mid) > Scalar(0)) lo = mid;
      else hi = mid;
    }
    radius = std::max(radius, hi);
  }
  return radius > Scalar(0) ? radius : step;
}

/// suggest_truncation with theta = 1, inflated by 50%.
template <typename Scalar>
Scalar default_truncation_radius(const Lyapunov<Scalar>& v, const DiffusionMatrix<Scalar>& a,
                                 const VectorField<Scalar>& b) {
  return Scalar(1.5) * suggest_truncation(v, a, b, Scalar(1));
}

}  // namespace gradlab

#endif  // GRADLAB_LYAPUNOV_HPP
