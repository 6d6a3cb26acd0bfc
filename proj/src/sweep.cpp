#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "runner.hpp"

namespace gradlab::app {

namespace {

Scenario apply_axis(const Scenario& base, const std::string& axis, double v) {
  Scenario s = base;
  s.levels = 1;
  if (axis == "k") {
    if (v < 1 || v != std::floor(v)) throw ConfigError("sweep.values", "k values must be positive integers");
    s.regularization_k = static_cast<int>(v);
    s.k_sequence.clear();
  } else if (axis == "h") {
    if (!(v > 0)) throw ConfigError("sweep.values", "h values must be positive");
    const double r = truncation_radius(base);
    const double cells = 2 * r / v;
    const auto n = std::llround(cells) + 1;
    if (std::abs(cells - std::round(cells)) > 1e-6 * cells || n % 2 == 0)
      throw ConfigError("sweep.values", "h = " + std::to_string(v) + " does not give an odd point count on radius " +
                                            std::to_string(r));
    const double h0 = 2 * r / static_cast<double>(base.points - 1);
    s.points = n;
    s.steps = std::max<Index>(1, std::llround(static_cast<double>(base.steps) * h0 / v));
    if (std::pow(static_cast<double>(n), s.dimension) > 1e6)
      throw ConfigError("sweep.values", "h = " + std::to_string(v) + " exceeds the feasibility cap of 1e6 nodes");
  } else if (axis == "n_steps") {
    if (v < 1 || v != std::floor(v)) throw ConfigError("sweep.values", "n_steps values must be positive integers");
    s.steps = static_cast<Index>(v);
  } else if (axis == "lambda") {
    if (!(v > 0)) throw ConfigError("sweep.values", "lambda values must be positive");
    s.lambdas = {v};
  } else {
    throw ConfigError("sweep.axis", "unknown axis '" + axis + "' (k, h, n_steps, lambda)");
  }
  return s;
}

/// finest-level value of a per-level detail entry
double last_level(const CheckResult& c, const char* key) { return c.detail["levels"].back()[key].get<double>(); }

/// G_lambda f for the first lambda and test function, on the sweep row's grid
NodeValues<double> resolvent_probe(const Scenario& s, const VectorField<double>& drift) {
  const Grid<double> g(s.dimension, truncation_radius(s), s.points);
  const auto gen = assemble_generator(g, diffusion_of(s), drift);
  return Resolvent<double>(gen, s.lambdas.front())(test_functions_of(s).front().on(g));
}

}  // namespace

bool SweepResult::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.pass; });
}

SweepResult run_sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values,
                      const RunOptions& options) {
  if (values.empty()) throw ConfigError("sweep.values", "value list is empty");
  SweepResult out;
  out.axis = axis;
  std::vector<Scenario> scenarios;
  for (double v : values) scenarios.push_back(apply_axis(base, axis, v));

  std::optional<NodeValues<double>> previous;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& s = scenarios[i];
    const auto result = run_scenario(s, options);
    SweepRow row;
    row.value = values[i];
    row.points = s.points;
    row.h = 2 * truncation_radius(s) / static_cast<double>(s.points - 1);
    row.steps = s.steps;
    row.pass = result.pass();
    for (const auto& c : result.checks) {
      if (c.category == "bound" && c.gating) {
        row.max_violation = std::max(row.max_violation, last_level(c, "max_violation"));
        row.max_tolerance = std::max(row.max_tolerance, last_level(c, "tolerance"));
      }
      if (c.category == "oracle" && c.name.rfind("oracle/stationary", 0) != 0)
        row.oracle_error = std::max(row.oracle_error.value_or(0.0), last_level(c, "error"));
    }
    if (axis == "k") {
      const Grid<double> g(s.dimension, truncation_radius(s), s.points);
      auto probe = resolvent_probe(s, effective_drift(s));
      row.resolvent_distance = inner_sup(g, NodeValues<double>(probe - resolvent_probe(s, base_drift(s))));
      if (previous) row.resolvent_change = inner_sup(g, NodeValues<double>(probe - *previous));
      previous = std::move(probe);
    }
    out.rows.push_back(row);
  }

  // observed order against the axis' natural step size
  auto step_size = [&](const SweepRow& r) {
    if (axis == "h") return r.h;
    if (axis == "n_steps") return 1.0 / static_cast<double>(r.steps);
    if (axis == "k") return 1.0 / r.value;
    return 0.0;
  };
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    auto& r = out.rows[i];
    const auto& p = out.rows[i - 1];
    const double s0 = step_size(p), s1 = step_size(r);
    if (s0 <= 0 || s1 <= 0 || s0 == s1) continue;
    std::optional<double> e0, e1;
    if (axis == "k") {
      e0 = p.resolvent_distance;
      e1 = r.resolvent_distance;
    } else if (p.oracle_error && r.oracle_error) {
      e0 = p.oracle_error;
      e1 = r.oracle_error;
    }
    if (e0 && e1 && *e0 > 0 && *e1 > 0) r.order = std::log(*e0 / *e1) / std::log(s0 / s1);
  }
  return out;
}

void write_sweep_csv(const SweepResult& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << std::setprecision(17);
  out << s.axis << ",points,h,n_steps,max_violation,max_tolerance,oracle_error,resolvent_distance,resolvent_change,order,pass\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : s.rows) {
    out << r.value << ',' << r.points << ',' << r.h << ',' << r.steps << ',' << r.max_violation << ','
        << r.max_tolerance << ',';
    opt(r.oracle_error);
    out << ',';
    opt(r.resolvent_distance);
    out << ',';
    opt(r.resolvent_change);
    out << ',';
    opt(r.order);
    out << ',' << (r.pass ? "true" : "false") << '\n';
  }
}

}  // namespace gradlab::app
