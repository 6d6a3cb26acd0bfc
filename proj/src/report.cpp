#include <filesystem>
#include <fstream>
#include <iomanip>

#include "runner.hpp"

namespace gradlab::app {

namespace fs = std::filesystem;

namespace {

const char* kHeaderNote =
    "Gating checks (hypotheses, pointwise semigroup and lemma-form resolvent bounds, sup-norm bounds, "
    "Markov structure, stationarity, invariance, regularization consistency) decide the exit code. "
    "Informational checks (theorem-form resolvent bound, duality residual, dual drift error, oracle errors, "
    "weak residuals) are reported but never fail a run, unless checks.gate_theorem_form is set. "
    "Pointwise margins gate only on the inner half-box |x_k| <= R/2.";

Json drift_echo(const DriftConfig& c) {
  Json j;
  j["kind"] = c.kind;
  if (!c.matrix.empty()) j["matrix"] = c.matrix;
  if (!c.terms.empty()) {
    Json terms = Json::array();
    for (const auto& t : c.terms) terms.push_back({{"coefficient", t.coefficient}, {"exponents", t.exponents}});
    j["terms"] = terms;
  }
  if (!c.vector.empty()) j["vector"] = c.vector;
  if (!c.file.empty()) {
    j["file"] = fs::path(c.file).filename().string();
    j["table_radius"] = c.table_radius;
    j["table_points"] = c.table_points;
  }
  j["scale"] = c.scale;
  if (c.declared_dissipative) j["declared_dissipative"] = *c.declared_dissipative;
  return j;
}

std::string file_safe(std::string name) {
  for (auto& ch : name)
    if (ch == '/') ch = '_';
    else if (ch == '=') ch = '-';
  return name;
}

Json check_json(const CheckResult& c) {
  Json j;
  j["name"] = c.name;
  j["category"] = c.category;
  j["gating"] = c.gating;
  j["pass"] = c.pass;
  if (!c.note.empty()) j["note"] = c.note;
  j["detail"] = c.detail;
  return j;
}

}  // namespace

Json scenario_echo(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  j["description"] = s.description;
  j["dimension"] = s.dimension;
  j["seed"] = s.seed;
  j["samples"] = s.samples;
  j["diffusion"] = s.diffusion;
  j["drift"] = drift_echo(s.drift);
  if (s.regularization_k) j["regularization_k"] = *s.regularization_k;
  if (!s.k_sequence.empty()) j["k_sequence"] = s.k_sequence;
  j["lyapunov"] = {{"power", s.lyapunov_power}, {"theta", s.lyapunov_theta}};
  j["grid"] = {{"radius", s.radius ? Json(*s.radius) : Json("auto")}, {"points", s.points}, {"levels", s.levels}};
  Json functions = Json::array();
  for (const auto& f : s.functions) functions.push_back(f.family);
  j["functions"] = functions;
  j["slope"] = s.slope;
  j["clip_n"] = s.clip_n;
  j["bump_radius"] = s.bump_radius;
  j["times"] = s.times;
  j["lambdas"] = s.lambdas;
  j["steps"] = s.steps;
  j["slack_factor"] = s.slack_factor;
  j["gate_theorem_form"] = s.gate_theorem_form;
  j["markov"] = s.markov;
  j["invariant_measure"] = s.invariant_measure;
  j["oracle"] = s.oracle;
  if (!s.dual_reference.empty()) j["dual_reference"] = s.dual_reference;
  if (s.has_schedule()) {
    Json pieces = Json::array();
    for (const auto& p : s.pieces) pieces.push_back({{"drift", drift_echo(p.drift)}, {"diffusion", p.diffusion}});
    j["schedule"] = {{"breakpoints", s.breakpoints}, {"steps_per_interval", s.steps_per_interval}, {"pieces", pieces}};
  }
  return j;
}

Json summary_json(const RunResult& r) {
  Json j;
  j["note"] = kHeaderNote;
  j["scenario"] = scenario_echo(r.scenario);
  j["pass"] = r.pass();
  j["exit_code"] = r.exit_code();
  Json failed = Json::array();
  for (const auto* list : {&r.hypotheses, &r.checks})
    for (const auto& c : *list)
      if (c.gating && !c.pass) failed.push_back(c.name);
  j["failed_gating"] = failed;
  Json hyp = Json::array();
  for (const auto& c : r.hypotheses) hyp.push_back(check_json(c));
  j["hypotheses"] = hyp;
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  j["checks"] = checks;
  return j;
}

void write_report(const RunResult& r, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "summary.json");
    if (!out) throw InvalidInput("cannot write " + (fs::path(dir) / "summary.json").string());
    out << summary_json(r).dump(2) << '\n';
  }
  for (const auto& t : r.margins) {
    const auto path = fs::path(dir) / ("margins_" + file_safe(t.check) + ".csv");
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& name : t.coordinate_names) out << name << ',';
    out << "lhs,rhs,margin\n";
    for (std::size_t i = 0; i < t.coordinates.size(); ++i) {
      for (double x : t.coordinates[i]) out << x << ',';
      const auto k = static_cast<Index>(i);
      out << t.lhs[k] << ',' << t.rhs[k] << ',' << t.margin[k] << '\n';
    }
  }
}

}  // namespace gradlab::app
