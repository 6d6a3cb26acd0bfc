#include "runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

namespace gradlab::app {

namespace {

constexpr double kDissipativityTolerance = 1e-8;
constexpr double kStationarityTolerance = 1e-9;
constexpr double kInvarianceTolerance = 1e-8;

const char* kTheoremNote =
    "theorem-form bound |grad G f| <= (1/lambda) G|grad f| is the documented inconsistency with the "
    "lemma form |grad G f| <= G|grad f|; for lambda > 1 it fails on the OU oracle by 1/(lambda+1) - 1/lambda^2. "
    "This is expected and not a code failure.";

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

/// Runs body(i) for i < count on a small pool; errors are rethrown in index order.
template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  if (count == 0) return;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double inner_distance(const Grid<double>& g, const NodeValues<double>& u, const NodeValues<double>& v) {
  return inner_sup(g, NodeValues<double>(u - v));
}

std::vector<Point<double>> points_of(const Grid<double>& g) {
  std::vector<Point<double>> pts;
  pts.reserve(static_cast<std::size_t>(g.size()));
  for (Index i = 0; i < g.size(); ++i) pts.push_back(g.point(i));
  return pts;
}

NodeValues<double> bump_on(const Grid<double>& g, double shift, double r) {
  Point<double> c = Point<double>::Zero(g.dimension());
  c[0] = shift;
  return TestFunction<double>::bump(c, r).on(g);
}

Json dissipativity_json(const DissipativityReport<double>& r) {
  Json j;
  j["samples"] = r.sample_count;
  j["max_inner_product"] = r.max_inner_product;
  j["tolerance"] = r.tolerance;
  j["witness_x"] = std::vector<double>(r.witness.x.data(), r.witness.x.data() + r.witness.x.size());
  j["witness_h"] = std::vector<double>(r.witness.h.data(), r.witness.h.data() + r.witness.h.size());
  return j;
}

bool is_identity(const std::vector<double>& m, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (m[static_cast<std::size_t>(i * d + j)] != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

/// c with b(x) = -c x, when the drift has that form.
std::optional<double> ou_rate(const DriftConfig& c, int d) {
  if (c.kind != "linear") return std::nullopt;
  const double rate = -c.scale * c.matrix[0];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (c.scale * c.matrix[static_cast<std::size_t>(i * d + j)] != (i == j ? -rate : 0.0)) return std::nullopt;
  return rate;
}

bool symmetric_linear(const DriftConfig& c, int d) {
  if (c.kind != "linear") return false;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (c.matrix[static_cast<std::size_t>(i * d + j)] != c.matrix[static_cast<std::size_t>(j * d + i)]) return false;
  return true;
}

struct Level {
  int index = 0;
  Grid<double> grid;
  Index steps = 0;
  DiscreteGenerator<double> gen;
  std::vector<NodeValues<double>> f;
  std::vector<double> tol;
  std::vector<double> floor;
};

struct InvariantLevel {
  bool skipped = false;
  std::string reason;
  double mass = 0;
  double stationarity = 0;
  int iterations = 0;
  double invariance = 0;
  std::optional<double> dual_error;
  std::size_t masked = 0;
  double duality = 0;
  std::optional<double> density_error;
};

struct RegularizedRun {
  double distance = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  /// largest max_violation - tolerance over the checks
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::string worst;
};

struct ScheduledLevel {
  BoundCheckReport<double> sup;
  double weak_residual = 0;
  std::optional<double> oracle_error;
};

Json level_json(const Level& l) {
  Json j;
  j["points"] = l.grid.points_per_axis();
  j["h"] = l.grid.spacing();
  j["steps"] = l.steps;
  return j;
}

Json bound_level_json(const Level& l, const BoundCheckReport<double>& r) {
  Json j = level_json(l);
  j["max_violation"] = r.max_violation;
  j["tolerance"] = r.tolerance;
  j["min_margin"] = r.min_margin;
  j["max_margin"] = r.max_margin;
  if (!r.pointwise) j["monotonicity_violation"] = r.monotonicity_violation;
  if (r.violation_index >= 0) {
    if (r.pointwise) {
      const auto x = l.grid.point(r.violation_index);
      j["violation_at"] = std::vector<double>(x.data(), x.data() + x.size());
    } else {
      j["violation_at"] = r.parameters[static_cast<std::size_t>(r.violation_index)];
    }
  }
  j["pass"] = r.pass;
  return j;
}

/// Refinement table of `values` over the levels; empty below three levels.
Json refinement_json(const std::vector<Level>& levels, const std::vector<double>& values) {
  if (levels.size() < 3) return nullptr;
  const auto table = refinement_study<double>(
      [&](int l) { return std::pair<double, double>(levels[static_cast<std::size_t>(l)].grid.spacing(),
                                                    values[static_cast<std::size_t>(l)]); },
      static_cast<int>(levels.size()));
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    Json row;
    row["h"] = r.h;
    row["value"] = r.value;
    row["order"] = r.order ? Json(*r.order) : Json(nullptr);
    rows.push_back(row);
  }
  Json j;
  j["rows"] = rows;
  j["ratios"] = table.ratios();
  if (!table.order_note().empty()) j["order_note"] = table.order_note();
  return j;
}

MarginTable margin_table(const std::string& check, const Level& l, const BoundCheckReport<double>& r,
                         const std::string& parameter_name) {
  static const char* axes[] = {"x", "y", "z"};
  MarginTable t;
  t.check = check;
  t.lhs = r.lhs;
  t.rhs = r.rhs;
  t.margin = r.margin;
  if (r.pointwise) {
    for (int k = 0; k < l.grid.dimension(); ++k) t.coordinate_names.push_back(axes[k]);
    for (Index i = 0; i < l.grid.size(); ++i) {
      const auto x = l.grid.point(i);
      t.coordinates.emplace_back(x.data(), x.data() + x.size());
    }
  } else {
    t.coordinate_names.push_back(parameter_name);
    for (double p : r.parameters) t.coordinates.push_back({p});
  }
  return t;
}

class Runner {
 public:
  Runner(Scenario s, const RunOptions& opt) : opt_(opt) {
    if (opt.seed) s.seed = *opt.seed;
    result_.scenario = std::move(s);
  }

  RunResult run() {
    const auto& s = result_.scenario;
    d_ = s.dimension;
    a_ = diffusion_of(s);
    base_ = base_drift(s);
    drift_ = effective_drift(s);
    schedule_ = schedule_of(s);
    functions_ = test_functions_of(s);
    validate_oracle();

    hypothesis_c();
    hypothesis_a();
    hypothesis_b();

    assemble();
    plan();
    parallel_for(tasks_.size(), opt_.threads, [&](std::size_t i) { tasks_[i](); });
    collect();
    return std::move(result_);
  }

 private:
  void validate_oracle() {
    const auto& s = result_.scenario;
    if (s.oracle != "ou") return;
    const auto rate = ou_rate(s.drift, d_);
    if (!is_identity(s.diffusion, d_) || !rate || *rate != 1.0 || s.regularization_k)
      throw ConfigError("checks.oracle", "the OU oracle needs A = I and the unregularized drift b(x) = -x");
  }

  // (Hc) Lyapunov truncation
  void hypothesis_c() {
    const auto& s = result_.scenario;
    CheckResult c;
    c.name = "Hc/truncation";
    c.category = "hypothesis";
    c.detail["lyapunov"] = "|x|^" + std::to_string(2 * s.lyapunov_power);
    c.detail["theta"] = s.lyapunov_theta;
    try {
      const double suggested = suggest_truncation(Lyapunov<double>(s.lyapunov_power), a_, drift_, s.lyapunov_theta);
      radius_ = s.radius ? *s.radius : 1.5 * suggested;
      c.detail["suggested_radius"] = suggested;
      c.detail["radius"] = radius_;
      c.detail["auto"] = !s.radius.has_value();
      c.pass = radius_ >= suggested;
      if (!c.pass) c.note = "radius is smaller than the Lyapunov truncation radius";
    } catch (const LyapunovFailure& e) {
      if (!s.radius) throw ConfigError("grid.radius", std::string("'auto' needs a Lyapunov function: ") + e.what());
      radius_ = *s.radius;
      c.detail["radius"] = radius_;
      c.pass = false;
      c.note = e.what();
    }
    result_.hypotheses.push_back(c);
  }

  // (Ha) diffusion bounds
  void hypothesis_a() {
    CheckResult c;
    c.name = "Ha/diffusion";
    c.category = "hypothesis";
    c.detail["min_eigenvalue"] = a_.min_eigenvalue();
    c.detail["max_eigenvalue"] = a_.max_eigenvalue();
    c.detail["bound"] = a_.bound();
    if (schedule_) c.detail["schedule_bound"] = uniform_bound(schedule_->diffusion);
    result_.hypotheses.push_back(c);
  }

  // (Hb) sampled dissipativity
  void hypothesis_b() {
    const auto& s = result_.scenario;
    const auto pairs = sample_pairs<double>(d_, radius_, s.samples, s.seed);
    auto add = [&](const std::string& name, const VectorField<double>& b, double strong) {
      CheckResult c;
      c.name = name;
      c.category = "hypothesis";
      const auto r = check_dissipative(b, pairs, kDissipativityTolerance, strong);
      c.pass = r.pass;
      c.detail = dissipativity_json(r);
      c.detail["strong_constant"] = strong;
      c.detail["declared_dissipative"] = b.declared_dissipative();
      if (!r.pass) c.note = "sampled pair violates (b(x+h) - b(x), h) <= -c|h|^2";
      result_.hypotheses.push_back(c);
    };
    add("Hb/drift", base_, 0.0);
    if (s.regularization_k) add("Hb/regularized/k=" + std::to_string(*s.regularization_k), drift_, 1.0 / *s.regularization_k);
    for (int k : s.k_sequence) {
      k_drifts_.push_back(regularized_drift(base_, k));
      add("Hb/regularized/k=" + std::to_string(k), k_drifts_.back(), 1.0 / k);
    }
    if (schedule_)
      for (std::size_t p = 0; p < schedule_->drift.size(); ++p)
        add("Hb/schedule/piece" + std::to_string(p + 1), schedule_->drift[p], 0.0);
  }

  void assemble() {
    const auto& s = result_.scenario;
    levels_.resize(static_cast<std::size_t>(s.levels));
    for (int l = 0; l < s.levels; ++l) {
      auto& lv = levels_[static_cast<std::size_t>(l)];
      lv.index = l;
      lv.grid = Grid<double>(d_, radius_, points_at_level(s, l));
      lv.steps = s.steps << l;
    }
    k_gens_.resize(k_drifts_.size());
    const std::size_t jobs = levels_.size() + k_drifts_.size() + (k_drifts_.empty() ? 0 : 1);
    parallel_for(jobs, opt_.threads, [&](std::size_t j) {
      if (j < levels_.size()) {
        auto& lv = levels_[j];
        lv.gen = assemble_generator(lv.grid, a_, drift_);
        for (const auto& fn : functions_) {
          lv.f.push_back(fn.on(lv.grid));
          lv.tol.push_back(default_slack(lv.grid, lv.f.back(), s.slack_factor));
          lv.floor.push_back(1e-9 * std::max(1.0, lv.f.back().cwiseAbs().maxCoeff()));
        }
      } else if (j < levels_.size() + k_drifts_.size()) {
        k_gens_[j - levels_.size()] = assemble_generator(levels_.front().grid, a_, k_drifts_[j - levels_.size()]);
      } else {
        base_gen_ = assemble_generator(levels_.front().grid, a_, base_);
      }
    });
  }

  template <typename F>
  void task(F&& f) {
    tasks_.emplace_back(std::forward<F>(f));
  }

  void plan() {
    const auto& s = result_.scenario;
    const std::size_t nf = functions_.size(), nt = s.times.size(), nl = s.lambdas.size(), L = levels_.size();
    semi_.assign(L, std::vector<std::vector<BoundCheckReport<double>>>(nf, std::vector<BoundCheckReport<double>>(nt)));
    theorem_.assign(L, std::vector<std::vector<BoundCheckReport<double>>>(nf, std::vector<BoundCheckReport<double>>(nl)));
    lemma_ = theorem_;
    sup_semi_.assign(L, std::vector<BoundCheckReport<double>>(nf));
    sup_res_ = sup_semi_;

    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t fi = 0; fi < nf; ++fi) {
        for (std::size_t ti = 0; ti < nt; ++ti)
          task([=, this] {
            const auto& lv = levels_[l];
            semi_[l][fi][ti] = check_semigroup_gradient_bound(lv.gen, lv.f[fi], s.times[ti], lv.steps, lv.tol[fi]);
          });
        for (std::size_t li = 0; li < nl; ++li)
          task([=, this] {
            const auto& lv = levels_[l];
            auto both = check_resolvent_gradient_bounds(lv.gen, lv.f[fi], s.lambdas[li], lv.tol[fi]);
            lemma_[l][fi][li] = std::move(both.first);
            theorem_[l][fi][li] = std::move(both.second);
          });
        task([=, this] {
          const auto& lv = levels_[l];
          sup_semi_[l][fi] = check_sup_semigroup(lv.gen, lv.f[fi], s.times, lv.steps, lv.tol[fi]);
        });
        task([=, this] {
          const auto& lv = levels_[l];
          sup_res_[l][fi] = check_sup_resolvent(lv.gen, lv.f[fi], s.lambdas, lv.tol[fi]);
        });
      }
    }
    plan_oracle();
    plan_schedule();
    plan_invariant_measure();
    plan_markov();
    plan_regularization();
  }

  void plan_oracle() {
    const auto& s = result_.scenario;
    if (s.oracle != "ou") return;
    const std::size_t L = levels_.size();
    for (std::size_t fi = 0; fi < functions_.size(); ++fi) {
      const auto datum = oracle_datum(functions_[fi]);
      if (!datum) continue;
      for (std::size_t ti = 0; ti < s.times.size(); ++ti) {
        const std::size_t slot = semi_err_.size();
        semi_err_.push_back({fi, ti, std::vector<double>(L)});
        for (std::size_t l = 0; l < L; ++l)
          task([=, this] {
            const auto& lv = levels_[l];
            OracleSpec<double> spec;
            spec.family = OracleSpec<double>::Family::Semigroup;
            spec.datum = *datum;
            spec.slope = functions_[fi].slope;
            spec.time = s.times[ti];
            const auto u = semigroup_apply(lv.gen, s.times[ti], lv.steps, lv.f[fi]);
            semi_err_[slot].errors[l] = inner_distance(lv.grid, u, ou_oracle(spec, points_of(lv.grid)));
          });
      }
      if (*datum != OracleSpec<double>::Datum::Linear) continue;
      for (std::size_t li = 0; li < s.lambdas.size(); ++li) {
        const std::size_t slot = res_err_.size();
        res_err_.push_back({fi, li, std::vector<double>(L)});
        for (std::size_t l = 0; l < L; ++l)
          task([=, this] {
            const auto& lv = levels_[l];
            OracleSpec<double> spec;
            spec.family = OracleSpec<double>::Family::Resolvent;
            spec.datum = *datum;
            spec.slope = functions_[fi].slope;
            spec.lambda = s.lambdas[li];
            const auto v = Resolvent<double>(lv.gen, s.lambdas[li])(lv.f[fi]);
            res_err_[slot].errors[l] = inner_distance(lv.grid, v, ou_oracle(spec, points_of(lv.grid)));
          });
      }
    }
  }

  void plan_schedule() {
    const auto& s = result_.scenario;
    if (!schedule_) return;
    // the scheduled OU oracle applies when every piece is A = I, b = -c x
    std::optional<double> integrated;
    if (s.oracle == "ou") {
      double sum = 0;
      bool ok = true;
      for (std::size_t p = 0; p < s.pieces.size() && ok; ++p) {
        const auto rate = ou_rate(s.pieces[p].drift, d_);
        ok = rate && is_identity(s.pieces[p].diffusion, d_);
        if (ok) sum += *rate * (s.breakpoints[p + 1] - s.breakpoints[p]);
      }
      if (ok) integrated = sum;
    }
    scheduled_.assign(levels_.size(), std::vector<ScheduledLevel>(functions_.size()));
    for (std::size_t l = 0; l < levels_.size(); ++l)
      for (std::size_t fi = 0; fi < functions_.size(); ++fi)
        task([=, this] {
          const auto& lv = levels_[l];
          ParabolicOptions<double> opt;
          opt.steps_per_interval = s.steps_per_interval << l;
          for (double t : s.times)
            if (t < 1) opt.report_times.push_back(t);
          const auto traj = parabolic_solve(*schedule_, lv.grid, lv.f[fi], opt);
          auto& out = scheduled_[l][fi];
          out.sup = check_sup_parabolic(traj, lv.grid, lv.tol[fi]);
          out.weak_residual = traj.max_weak_residual();
          const auto datum = oracle_datum(functions_[fi]);
          if (integrated && datum == OracleSpec<double>::Datum::Linear) {
            OracleSpec<double> spec;
            spec.family = OracleSpec<double>::Family::ScheduledParabolic;
            spec.datum = *datum;
            spec.slope = functions_[fi].slope;
            spec.integrated_rate = *integrated;
            out.oracle_error = inner_distance(lv.grid, traj.final_state(), ou_oracle(spec, points_of(lv.grid)));
          }
        });
  }

  /// b_hat reference: the drift itself when it is a gradient field for scalar A, or the configured matrix.
  std::optional<VectorField<double>> dual_reference() const {
    const auto& s = result_.scenario;
    if (!s.dual_reference.empty()) {
      MatrixX<double> m(d_, d_);
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) m(i, j) = s.dual_reference[static_cast<std::size_t>(i * d_ + j)];
      return VectorField<double>::linear(m);
    }
    const MatrixX<double>& am = a_.matrix();
    const bool scalar_a = am.isApprox(am(0, 0) * MatrixX<double>::Identity(d_, d_), 0.0);
    if (d_ == 1 || (scalar_a && (s.drift.kind == "polynomial-gradient" || symmetric_linear(s.drift, d_))))
      return drift_;
    return std::nullopt;
  }

  void plan_invariant_measure() {
    const auto& s = result_.scenario;
    if (!s.invariant_measure) return;
    invariant_.assign(levels_.size(), {});
    const auto reference = dual_reference();
    for (std::size_t l = 0; l < levels_.size(); ++l)
      task([=, this] {
        const auto& lv = levels_[l];
        auto& out = invariant_[l];
        if (!lv.gen.monotone) {
          out.skipped = true;
          out.reason = "generator is not monotone";
          return;
        }
        const auto rho = stationary_density(lv.gen);
        out.mass = rho.mass();
        out.stationarity = rho.stationarity_residual;
        out.iterations = rho.iterations;
        for (std::size_t fi = 0; fi < functions_.size(); ++fi) {
          const double scale = std::max(1.0, lv.f[fi].cwiseAbs().maxCoeff());
          for (double t : s.times) {
            const double gap = std::abs(rho.pairing(semigroup_apply(lv.gen, t, lv.steps, lv.f[fi])) - rho.pairing(lv.f[fi]));
            out.invariance = std::max(out.invariance, gap / scale);
          }
        }
        const auto dual = dual_drift(rho, a_, drift_, lv.grid);
        out.masked = dual.masked.size();
        if (reference) {
          double err = 0;
          for (Index i = 0; i < lv.grid.size(); ++i)
            if (lv.grid.in_inner_box(i))
              err = std::max(err, (Point<double>(dual.values.row(i).transpose()) - (*reference)(lv.grid.point(i))).norm());
          out.dual_error = err;
        }
        // rows of masked nodes never meet the test functions as long as they lie outside the inner box
        const bool usable = std::none_of(dual.masked.begin(), dual.masked.end(),
                                         [&](Index i) { return lv.grid.in_inner_box(i); });
        if (usable) {
          const MatrixX<double> filled = dual.values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
          const auto dual_gen = assemble_generator(lv.grid, a_, VectorField<double>::tabulated(lv.grid, filled, false));
          const double r = lv.grid.radius();
          out.duality = duality_residual(lv.gen, dual_gen, rho, bump_on(lv.grid, -r / 8, r / 4), bump_on(lv.grid, r / 8, r / 4));
        } else {
          out.duality = std::numeric_limits<double>::quiet_NaN();
        }
        if (s.oracle == "ou") {
          OracleSpec<double> spec;
          spec.family = OracleSpec<double>::Family::StationaryDensity;
          const auto exact = ou_oracle(spec, points_of(lv.grid));
          double err = 0;
          for (Index i = 0; i < lv.grid.size(); ++i)
            if (lv.grid.in_inner_box(i)) err = std::max(err, std::abs(rho.values[i] - exact[i]) / exact[i]);
          out.density_error = err;
        }
      });
  }

  void plan_markov() {
    const auto& s = result_.scenario;
    if (!s.markov) return;
    task([this, &s] {
      const double lambda = s.lambdas.front();
      const double mu = s.lambdas.size() > 1 ? s.lambdas[1] : 2 * lambda;
      markov_ = check_markov_structure(levels_.front().gen, lambda, mu, s.times.back(), s.steps, s.seed);
    });
  }

  void plan_regularization() {
    const auto& s = result_.scenario;
    if (k_drifts_.empty()) return;
    regularized_.assign(k_drifts_.size(), {});
    task([this, &s] {
      const auto& lv = levels_.front();
      base_resolvent_ = Resolvent<double>(base_gen_, s.lambdas.front())(lv.f.front());
    });
    for (std::size_t k = 0; k < k_drifts_.size(); ++k)
      task([=, this, &s] {
        const auto& lv = levels_.front();
        const auto& gen = k_gens_[k];
        auto& out = regularized_[k];
        out.distance = std::numeric_limits<double>::quiet_NaN();
        auto note = [&](const BoundCheckReport<double>& r, const std::string& what) {
          ++out.checks;
          if (!r.pass) ++out.failures;
          if (r.max_violation - r.tolerance > out.worst_excess) {
            out.worst_excess = r.max_violation - r.tolerance;
            out.worst = what;
          }
        };
        for (std::size_t fi = 0; fi < functions_.size(); ++fi) {
          const auto& fname = functions_[fi].name;
          for (double t : s.times)
            note(check_semigroup_gradient_bound(gen, lv.f[fi], t, lv.steps, lv.tol[fi]),
                 "semigroup-pointwise/" + fname + "/t=" + num(t));
          for (double lam : s.lambdas)
            note(check_resolvent_gradient_bound(gen, lv.f[fi], lam, ResolventForm::Lemma, lv.tol[fi]),
                 "resolvent-lemma/" + fname + "/lambda=" + num(lam));
        }
      });
    k_resolvent_.assign(k_drifts_.size(), {});
    for (std::size_t k = 0; k < k_drifts_.size(); ++k)
      task([=, this, &s] {
        k_resolvent_[k] = Resolvent<double>(k_gens_[k], s.lambdas.front())(levels_.front().f.front());
      });
  }

  CheckResult bound_result(const std::string& name, bool gating, bool require_monotone,
                           const std::function<const BoundCheckReport<double>&(std::size_t)>& at, std::size_t fi,
                           const Json& parameter) {
    CheckResult c;
    c.name = name;
    c.category = "bound";
    c.gating = gating;
    c.detail["bound"] = to_string(at(0).bound);
    c.detail["function"] = functions_[fi].name;
    if (!parameter.is_null()) c.detail["parameter"] = parameter;
    Json lv = Json::array();
    std::vector<double> violations;
    bool all = true;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      lv.push_back(bound_level_json(levels_[l], at(l)));
      violations.push_back(at(l).max_violation);
      all = all && at(l).pass;
    }
    c.detail["levels"] = lv;
    bool monotone = true;
    for (std::size_t l = 1; l < violations.size(); ++l)
      if (violations[l] > violations[l - 1] + levels_.front().floor[fi]) monotone = false;
    c.detail["violation_non_increasing"] = monotone;
    if (auto table = refinement_json(levels_, violations); !table.is_null()) c.detail["refinement"] = table;
    c.pass = all && (!require_monotone || monotone);
    if (!all) c.note = "violation beyond tolerance";
    else if (require_monotone && !monotone) c.note = "violation grows under refinement";
    const auto& finest = at(levels_.size() - 1);
    result_.margins.push_back(margin_table(name, levels_.back(), finest,
                                           finest.bound == BoundKind::SupResolvent ? "lambda" : "t"));
    return c;
  }

  void collect() {
    const auto& s = result_.scenario;
    auto& out = result_.checks;
    for (std::size_t fi = 0; fi < functions_.size(); ++fi) {
      const auto& fname = functions_[fi].name;
      for (std::size_t ti = 0; ti < s.times.size(); ++ti)
        out.push_back(bound_result("semigroup-pointwise/" + fname + "/t=" + num(s.times[ti]), true, true,
                                   [&](std::size_t l) -> const auto& { return semi_[l][fi][ti]; }, fi,
                                   Json{{"t", s.times[ti]}}));
      for (std::size_t li = 0; li < s.lambdas.size(); ++li) {
        const double lam = s.lambdas[li];
        out.push_back(bound_result("resolvent-lemma/" + fname + "/lambda=" + num(lam), true, true,
                                   [&](std::size_t l) -> const auto& { return lemma_[l][fi][li]; }, fi,
                                   Json{{"lambda", lam}}));
        auto th = bound_result("resolvent-theorem/" + fname + "/lambda=" + num(lam), s.gate_theorem_form, false,
                               [&](std::size_t l) -> const auto& { return theorem_[l][fi][li]; }, fi,
                               Json{{"lambda", lam}});
        th.note = kTheoremNote;
        if (s.oracle == "ou" && functions_[fi].family == TestFunction<double>::Family::Linear) {
          const double a = functions_[fi].slope.norm();
          th.detail["expected_violation"] = std::max(0.0, a * (1 / (lam + 1) - 1 / (lam * lam)));
          th.detail["expected_lemma_margin"] = a * (1 / lam - 1 / (lam + 1));
        }
        out.push_back(th);
      }
      out.push_back(bound_result("sup-semigroup/" + fname, true, true,
                                 [&](std::size_t l) -> const auto& { return sup_semi_[l][fi]; }, fi, nullptr));
      out.push_back(bound_result("sup-resolvent/" + fname, true, true,
                                 [&](std::size_t l) -> const auto& { return sup_res_[l][fi]; }, fi, nullptr));
      if (schedule_) {
        out.push_back(bound_result("parabolic-sup/" + fname, true, true,
                                   [&](std::size_t l) -> const auto& { return scheduled_[l][fi].sup; }, fi, nullptr));
        CheckResult w;
        w.name = "parabolic-weak-residual/" + fname;
        w.category = "parabolic";
        w.gating = false;
        std::vector<double> res;
        for (const auto& sl : scheduled_) res.push_back(sl[fi].weak_residual);
        w.detail["weak_residual"] = res;
        out.push_back(w);
        if (scheduled_.front()[fi].oracle_error) {
          std::vector<double> errs;
          for (const auto& sl : scheduled_) errs.push_back(*sl[fi].oracle_error);
          out.push_back(oracle_result("oracle/parabolic/" + fname + "/t=1", errs));
        }
      }
    }
    for (const auto& e : semi_err_)
      out.push_back(oracle_result("oracle/semigroup/" + functions_[e.function].name + "/t=" + num(s.times[e.parameter]),
                                  e.errors));
    for (const auto& e : res_err_)
      out.push_back(oracle_result(
          "oracle/resolvent/" + functions_[e.function].name + "/lambda=" + num(s.lambdas[e.parameter]), e.errors));
    collect_markov();
    collect_invariant();
    collect_regularization();
  }

  CheckResult oracle_result(const std::string& name, const std::vector<double>& errors) {
    CheckResult c;
    c.name = name;
    c.category = "oracle";
    c.gating = false;
    Json lv = Json::array();
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      Json j = level_json(levels_[l]);
      j["error"] = errors[l];
      lv.push_back(j);
    }
    c.detail["levels"] = lv;
    if (auto table = refinement_json(levels_, errors); !table.is_null()) c.detail["refinement"] = table;
    return c;
  }

  void collect_markov() {
    if (!markov_) return;
    const auto& m = *markov_;
    CheckResult c;
    c.name = "markov";
    c.category = "markov";
    c.pass = m.pass;
    c.detail["interior_row_sum"] = m.interior_row_sum;
    c.detail["all_row_sum"] = m.all_row_sum;
    c.detail["constant_preservation"] = m.constant_preservation;
    c.detail["positivity_defect"] = m.positivity_defect;
    c.detail["resolvent_identity"] = m.resolvent_identity;
    c.detail["contraction_excess"] = m.contraction_excess;
    c.detail["tolerance"] = m.tolerance;
    c.detail["monotone"] = levels_.front().gen.monotone;
    if (!m.pass) c.note = "Markov structure violated beyond tolerance";
    result_.checks.push_back(c);
  }

  void collect_invariant() {
    if (invariant_.empty()) return;
    auto& out = result_.checks;
    if (invariant_.front().skipped) {
      CheckResult c;
      c.name = "invariant-measure";
      c.category = "invariant-measure";
      c.gating = false;
      c.note = "skipped: " + invariant_.front().reason;
      out.push_back(c);
      return;
    }
    auto per_level = [&](const std::string& name, bool gating, double tol, auto value) {
      CheckResult c;
      c.name = name;
      c.category = "invariant-measure";
      c.gating = gating;
      Json lv = Json::array();
      std::vector<double> values;
      for (std::size_t l = 0; l < levels_.size(); ++l) {
        Json j = level_json(levels_[l]);
        const double v = value(invariant_[l]);
        j["value"] = v;
        if (tol > 0) {
          j["tolerance"] = tol;
          c.pass = c.pass && v <= tol;
        }
        values.push_back(v);
        lv.push_back(j);
      }
      c.detail["levels"] = lv;
      if (auto table = refinement_json(levels_, values); !table.is_null()) c.detail["refinement"] = table;
      return c;
    };
    out.push_back(per_level("stationarity", true, kStationarityTolerance,
                            [](const InvariantLevel& v) { return v.stationarity; }));
    auto inv = per_level("invariance", true, kInvarianceTolerance, [](const InvariantLevel& v) { return v.invariance; });
    inv.detail["measure"] = "max |<rho, T_t f> - <rho, f>| / max(1, |f|_inf)";
    out.push_back(inv);
    if (invariant_.front().dual_error) {
      auto c = per_level("dual-drift", false, 0, [](const InvariantLevel& v) { return *v.dual_error; });
      bool within = true;
      for (std::size_t l = 0; l < levels_.size(); ++l)
        within = within && *invariant_[l].dual_error <= 10 * levels_[l].grid.spacing();
      c.detail["within_10h"] = within;
      out.push_back(c);
    }
    auto dual = per_level("duality-residual", false, 0, [](const InvariantLevel& v) { return v.duality; });
    dual.detail["masked_nodes"] = invariant_.back().masked;
    out.push_back(dual);
    if (invariant_.front().density_error) {
      auto c = per_level("oracle/stationary-density", false, 0, [](const InvariantLevel& v) { return *v.density_error; });
      c.category = "oracle";
      bool within = true;
      for (std::size_t l = 0; l < levels_.size(); ++l)
        within = within && *invariant_[l].density_error <= 10 * levels_[l].grid.spacing();
      c.detail["within_10h"] = within;
      out.push_back(c);
    }
  }

  void collect_regularization() {
    const auto& s = result_.scenario;
    if (regularized_.empty()) return;
    auto& out = result_.checks;
    std::vector<double> dist;
    for (std::size_t k = 0; k < k_drifts_.size(); ++k) {
      dist.push_back(inner_distance(levels_.front().grid, k_resolvent_[k], base_resolvent_));
      const auto& r = regularized_[k];
      CheckResult c;
      c.name = "regularization/k=" + std::to_string(s.k_sequence[k]) + "/bounds";
      c.category = "regularization";
      c.pass = r.failures == 0;
      c.detail["checks"] = r.checks;
      c.detail["failures"] = r.failures;
      c.detail["worst_excess"] = r.worst_excess;
      c.detail["worst_check"] = r.worst;
      if (!c.pass) c.note = "bound checks fail for the regularized drift";
      out.push_back(c);
    }
    CheckResult c;
    c.name = "regularization/consistency";
    c.category = "regularization";
    c.detail["lambda"] = s.lambdas.front();
    c.detail["function"] = functions_.front().name;
    c.detail["k"] = s.k_sequence;
    c.detail["distance"] = dist;
    for (std::size_t k = 1; k < dist.size(); ++k)
      if (!(dist[k] < dist[k - 1])) c.pass = false;
    if (!c.pass) c.note = "sup distance of G^(k) f to G f is not decreasing in k";
    out.push_back(c);
  }

  struct OracleSlot {
    std::size_t function;
    std::size_t parameter;
    std::vector<double> errors;
  };

  RunOptions opt_;
  RunResult result_;
  int d_ = 1;
  double radius_ = 1;
  DiffusionMatrix<double> a_;
  VectorField<double> base_, drift_;
  std::optional<CoefficientSchedule<double>> schedule_;
  std::vector<TestFunction<double>> functions_;
  std::vector<VectorField<double>> k_drifts_;
  std::vector<DiscreteGenerator<double>> k_gens_;
  DiscreteGenerator<double> base_gen_;
  std::vector<Level> levels_;
  std::vector<std::function<void()>> tasks_;

  std::vector<std::vector<std::vector<BoundCheckReport<double>>>> semi_, lemma_, theorem_;
  std::vector<std::vector<BoundCheckReport<double>>> sup_semi_, sup_res_;
  std::vector<std::vector<ScheduledLevel>> scheduled_;
  std::vector<OracleSlot> semi_err_, res_err_;
  std::vector<InvariantLevel> invariant_;
  std::optional<MarkovReport<double>> markov_;
  std::vector<RegularizedRun> regularized_;
  NodeValues<double> base_resolvent_;
  std::vector<NodeValues<double>> k_resolvent_;
};

}  // namespace

bool RunResult::pass() const {
  auto ok = [](const CheckResult& c) { return !c.gating || c.pass; };
  return std::all_of(hypotheses.begin(), hypotheses.end(), ok) && std::all_of(checks.begin(), checks.end(), ok);
}

const CheckResult* RunResult::find(const std::string& name) const {
  for (const auto* list : {&hypotheses, &checks})
    for (const auto& c : *list)
      if (c.name == name) return &c;
  return nullptr;
}

RunResult run_scenario(Scenario scenario, const RunOptions& options) {
  return Runner(std::move(scenario), options).run();
}

}  // namespace gradlab::app
