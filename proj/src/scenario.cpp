#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gradlab::app {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr double kFeasibilityCap = 1e6;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::set<std::string> drift_keys{"kind",  "matrix", "terms",        "vector",       "scale",
                                                "file",  "table_radius", "table_points", "declared_dissipative"};
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario", {"name", "description", "dimension", "seed", "samples"}},
      {"diffusion", {"matrix"}},
      {"drift", drift_keys},
      {"regularization", {"k", "k_sequence"}},
      {"lyapunov", {"power", "theta"}},
      {"grid", {"radius", "points", "levels"}},
      {"checks",
       {"functions", "slope", "clip_n", "bump_radius", "times", "lambdas", "steps", "slack_factor",
        "gate_theorem_form", "markov", "invariant_measure", "oracle", "dual_reference"}},
      {"schedule", {"breakpoints", "steps_per_interval"}},
      {"output", {"dir"}},
  };
  return keys;
}

std::set<std::string> piece_keys() {
  std::set<std::string> k = known_keys().at("drift");
  k.insert("diffusion");
  return k;
}

class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool present() const { return tree_ != nullptr; }
  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }
  std::string field(const std::string& key) const { return name_ + "." + key; }

  std::string text(const std::string& key) const {
    auto it = tree_->find(key);
    if (!tree_ || it == tree_->not_found()) throw ConfigError(field(key), "missing");
    return boost::trim_copy(it->second.data());
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  double real(const std::string& key) const { return parse_real(text(key), field(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  long long integer(const std::string& key) const { return parse_integer(text(key), field(key)); }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto v = boost::to_lower_copy(text(key));
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(field(key), "expected true or false, got '" + v + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : tokens(text(key))) out.push_back(parse_real(tok, field(key)));
    return out;
  }
  std::vector<std::string> words(const std::string& key) const { return tokens(text(key)); }

  static double parse_real(const std::string& s, const std::string& field) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError(field, "expected a number, got '" + s + "'");
    }
  }
  static long long parse_integer(const std::string& s, const std::string& field) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(field, "expected an integer, got '" + s + "'");
    }
  }
  static std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(", \t"), boost::token_compress_on);
    parts.erase(std::remove_if(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); }), parts.end());
    return parts;
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

Section section(const pt::ptree& root, const std::string& name) {
  auto it = root.find(name);
  return Section(name, it == root.not_found() ? nullptr : &it->second);
}

void check_keys(const pt::ptree& tree, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : tree)
    if (!allowed.count(key)) throw ConfigError(name + "." + key, "unknown key");
}

std::vector<Monomial<double>> parse_terms(const std::string& text, int d, const std::string& field) {
  // "c:e1,e2,... | c:e1,..."
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of("|"));
  std::vector<Monomial<double>> out;
  for (auto part : parts) {
    boost::trim(part);
    if (part.empty()) continue;
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw ConfigError(field, "term '" + part + "' lacks 'coefficient:exponents'");
    Monomial<double> m;
    m.coefficient = Section::parse_real(boost::trim_copy(part.substr(0, colon)), field);
    for (const auto& tok : Section::tokens(part.substr(colon + 1))) {
      const auto e = Section::parse_integer(tok, field);
      if (e < 0) throw ConfigError(field, "exponents must be nonnegative");
      m.exponents.push_back(static_cast<int>(e));
    }
    if (static_cast<int>(m.exponents.size()) != d)
      throw ConfigError(field, "term '" + part + "' needs " + std::to_string(d) + " exponents");
    out.push_back(m);
  }
  if (out.empty()) throw ConfigError(field, "no polynomial terms given");
  return out;
}

DriftConfig parse_drift(const Section& s, int d, const std::string& source_dir) {
  DriftConfig c;
  c.kind = s.text("kind", "linear");
  if (c.kind == "linear") {
    c.matrix = s.reals("matrix");
    if (c.matrix.size() != static_cast<std::size_t>(d * d))
      throw ConfigError(s.field("matrix"), "needs " + std::to_string(d * d) + " entries (row-major)");
  } else if (c.kind == "polynomial-gradient") {
    c.terms = parse_terms(s.text("terms"), d, s.field("terms"));
  } else if (c.kind == "constant") {
    c.vector = s.reals("vector");
    if (c.vector.size() != static_cast<std::size_t>(d))
      throw ConfigError(s.field("vector"), "needs " + std::to_string(d) + " entries");
  } else if (c.kind == "sign") {
  } else if (c.kind == "tabulated") {
    c.file = s.text("file");
    if (fs::path(c.file).is_relative()) c.file = (fs::path(source_dir) / c.file).string();
    c.table_radius = s.real("table_radius");
    c.table_points = s.integer("table_points");
    if (!(c.table_radius > 0)) throw ConfigError(s.field("table_radius"), "must be positive");
    if (c.table_points < 3 || c.table_points % 2 == 0)
      throw ConfigError(s.field("table_points"), "must be odd and >= 3");
  } else {
    throw ConfigError(s.field("kind"), "unknown drift kind '" + c.kind +
                                           "' (linear, polynomial-gradient, sign, constant, tabulated)");
  }
  c.scale = s.real("scale", 1.0);
  if (s.has("declared_dissipative")) c.declared_dissipative = s.flag("declared_dissipative", false);
  return c;
}

std::vector<double> parse_matrix(const Section& s, const std::string& key, int d) {
  auto m = s.reals(key);
  if (m.size() != static_cast<std::size_t>(d * d))
    throw ConfigError(s.field(key), "needs " + std::to_string(d * d) + " entries (row-major)");
  return m;
}

DiffusionMatrix<double> diffusion_from(const std::vector<double>& v, int d, const std::string& field) {
  MatrixX<double> a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = v[static_cast<std::size_t>(i * d + j)];
  try {
    return DiffusionMatrix<double>(a);
  } catch (const InvalidInput& e) {
    throw ConfigError(field, e.what());
  }
}

void require_positive_list(const Section& s, const std::string& key, const std::vector<double>& v) {
  if (v.empty()) throw ConfigError(s.field(key), "list is empty");
  for (double x : v)
    if (!(x > 0)) throw ConfigError(s.field(key), "values must be positive");
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& source) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("(file)", e.message() + " at line " + std::to_string(e.line()));
  }
  const auto& known = known_keys();
  for (const auto& [name, tree] : root) {
    if (tree.empty() && !tree.data().empty()) throw ConfigError(name, "keys must live inside a [section]");
    if (boost::starts_with(name, "schedule.piece")) {
      check_keys(tree, name, piece_keys());
      continue;
    }
    auto it = known.find(name);
    if (it == known.end()) throw ConfigError(name, "unknown section");
    check_keys(tree, name, it->second);
  }

  Scenario s;
  s.source = source;
  const std::string dir = source.empty() ? "." : fs::path(source).parent_path().string();

  const auto meta = section(root, "scenario");
  s.name = meta.text("name", fs::path(source).stem().string());
  s.description = meta.text("description", "");
  s.dimension = static_cast<int>(meta.integer("dimension", 1));
  if (s.dimension < 1 || s.dimension > 3) throw ConfigError(meta.field("dimension"), "must be 1, 2 or 3");
  const int d = s.dimension;
  const auto seed = meta.integer("seed", static_cast<long long>(s.seed));
  if (seed < 0) throw ConfigError(meta.field("seed"), "must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  const auto samples = meta.integer("samples", 200);
  if (samples < 1) throw ConfigError(meta.field("samples"), "must be positive");
  s.samples = static_cast<std::size_t>(samples);

  const auto diff = section(root, "diffusion");
  if (diff.has("matrix")) {
    s.diffusion = parse_matrix(diff, "matrix", d);
  } else {
    s.diffusion.assign(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) s.diffusion[static_cast<std::size_t>(i * d + i)] = 1.0;
  }
  diffusion_from(s.diffusion, d, diff.field("matrix"));

  const auto drift = section(root, "drift");
  if (!drift.present()) throw ConfigError("drift", "section is required");
  s.drift = parse_drift(drift, d, dir);

  const auto reg = section(root, "regularization");
  if (reg.has("k")) {
    const auto k = reg.integer("k");
    if (k < 1) throw ConfigError(reg.field("k"), "must be a positive integer");
    s.regularization_k = static_cast<int>(k);
  }
  if (reg.has("k_sequence")) {
    for (double k : reg.reals("k_sequence")) {
      if (k < 1 || k != std::floor(k)) throw ConfigError(reg.field("k_sequence"), "entries must be positive integers");
      s.k_sequence.push_back(static_cast<int>(k));
    }
    if (s.k_sequence.size() < 2) throw ConfigError(reg.field("k_sequence"), "needs at least two values");
  }

  const auto lyap = section(root, "lyapunov");
  s.lyapunov_power = static_cast<int>(lyap.integer("power", 1));
  if (s.lyapunov_power < 1) throw ConfigError(lyap.field("power"), "must be >= 1");
  s.lyapunov_theta = lyap.real("theta", 1.0);
  if (!(s.lyapunov_theta > 0)) throw ConfigError(lyap.field("theta"), "must be positive");

  const auto grid = section(root, "grid");
  const auto radius = grid.text("radius", "auto");
  if (radius != "auto") {
    s.radius = Section::parse_real(radius, grid.field("radius"));
    if (!(*s.radius > 0)) throw ConfigError(grid.field("radius"), "must be positive or 'auto'");
  }
  s.points = grid.integer("points", 101);
  if (s.points < 3 || s.points % 2 == 0) throw ConfigError(grid.field("points"), "must be odd and >= 3");
  s.levels = static_cast<int>(grid.integer("levels", 3));
  if (s.levels < 1 || s.levels > 8) throw ConfigError(grid.field("levels"), "must be in 1..8");
  if (std::pow(static_cast<double>(points_at_level(s, s.levels - 1)), d) > kFeasibilityCap)
    throw ConfigError(grid.field("points"), "finest level exceeds the feasibility cap of 1e6 nodes");

  const auto checks = section(root, "checks");
  for (const auto& name : checks.has("functions") ? checks.words("functions") : std::vector<std::string>{"linear"}) {
    static const std::set<std::string> families{"constant", "linear", "sine", "bump", "clipped_linear"};
    if (!families.count(name))
      throw ConfigError(checks.field("functions"),
                        "unknown test function '" + name + "' (constant, linear, sine, bump, clipped_linear)");
    s.functions.push_back({name});
  }
  if (checks.has("slope")) {
    s.slope = checks.reals("slope");
    if (s.slope.size() != static_cast<std::size_t>(d))
      throw ConfigError(checks.field("slope"), "needs " + std::to_string(d) + " entries");
  } else {
    s.slope.assign(static_cast<std::size_t>(d), 1.0);
  }
  s.clip_n = checks.real("clip_n", 1.0);
  if (!(s.clip_n >= 0)) throw ConfigError(checks.field("clip_n"), "must be nonnegative");
  s.bump_radius = checks.real("bump_radius", 1.0);
  if (!(s.bump_radius > 0)) throw ConfigError(checks.field("bump_radius"), "must be positive");
  s.times = checks.has("times") ? checks.reals("times") : std::vector<double>{0.1, 0.5, 1.0};
  require_positive_list(checks, "times", s.times);
  s.lambdas = checks.has("lambdas") ? checks.reals("lambdas") : std::vector<double>{0.5, 1.0, 4.0};
  require_positive_list(checks, "lambdas", s.lambdas);
  s.steps = checks.integer("steps", 32);
  if (s.steps < 1) throw ConfigError(checks.field("steps"), "must be positive");
  s.slack_factor = checks.real("slack_factor", 10.0);
  if (!(s.slack_factor >= 0)) throw ConfigError(checks.field("slack_factor"), "must be nonnegative");
  s.gate_theorem_form = checks.flag("gate_theorem_form", false);
  s.markov = checks.flag("markov", true);
  s.invariant_measure = checks.flag("invariant_measure", true);
  s.oracle = checks.text("oracle", "none");
  if (s.oracle != "none" && s.oracle != "ou") throw ConfigError(checks.field("oracle"), "must be 'none' or 'ou'");
  if (checks.has("dual_reference")) s.dual_reference = parse_matrix(checks, "dual_reference", d);

  const auto sched = section(root, "schedule");
  if (sched.present()) {
    s.breakpoints = sched.reals("breakpoints");
    s.steps_per_interval = sched.integer("steps_per_interval", 8);
    if (s.steps_per_interval < 1) throw ConfigError(sched.field("steps_per_interval"), "must be positive");
    if (s.breakpoints.size() < 2) throw ConfigError(sched.field("breakpoints"), "needs at least two values");
    for (std::size_t k = 1; k <= s.breakpoints.size() - 1; ++k) {
      const auto name = "schedule.piece" + std::to_string(k);
      const auto piece = section(root, name);
      if (!piece.present()) throw ConfigError(name, "section is required for interval " + std::to_string(k));
      SchedulePiece p;
      p.drift = parse_drift(piece, d, dir);
      p.diffusion = piece.has("diffusion") ? parse_matrix(piece, "diffusion", d) : s.diffusion;
      diffusion_from(p.diffusion, d, piece.field("diffusion"));
      s.pieces.push_back(p);
    }
    if (root.find("schedule.piece" + std::to_string(s.breakpoints.size())) != root.not_found())
      throw ConfigError("schedule.piece" + std::to_string(s.breakpoints.size()), "more pieces than intervals");
    try {
      schedule_of(s)->validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidInput& e) {
      throw ConfigError(sched.field("breakpoints"), e.what());
    }
  } else {
    for (const auto& [name, tree] : root)
      if (boost::starts_with(name, "schedule.piece")) throw ConfigError(name, "needs a [schedule] section");
  }

  s.output_dir = section(root, "output").text("dir", "");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open scenario '" + path + "'");
  return parse_scenario(in, path);
}

std::string resolve_scenario_path(const std::string& name_or_path) {
  if (fs::exists(name_or_path)) return name_or_path;
  const fs::path bundled = fs::path(GRADLAB_SCENARIO_DIR) / (name_or_path + ".ini");
  if (fs::exists(bundled)) return bundled.string();
  throw ConfigError("(file)", "no scenario file or bundled scenario named '" + name_or_path + "'");
}

std::vector<std::pair<std::string, std::string>> bundled_scenarios() {
  std::vector<std::pair<std::string, std::string>> out;
  const fs::path dir(GRADLAB_SCENARIO_DIR);
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    const auto s = load_scenario(entry.path().string());
    out.emplace_back(entry.path().stem().string(), s.description);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DiffusionMatrix<double> diffusion_of(const Scenario& s) {
  return diffusion_from(s.diffusion, s.dimension, "diffusion.matrix");
}

VectorField<double> build_drift(const DriftConfig& c, int d) {
  VectorField<double> b;
  if (c.kind == "linear") {
    MatrixX<double> m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = c.matrix[static_cast<std::size_t>(i * d + j)];
    b = VectorField<double>::linear(c.scale * m);
    return c.declared_dissipative ? VectorField<double>::composite(d, b, *c.declared_dissipative, b.description())
                                  : b;
  }
  if (c.kind == "polynomial-gradient") {
    auto terms = c.terms;
    for (auto& t : terms) t.coefficient *= c.scale;
    return VectorField<double>::polynomial_gradient(d, terms, c.declared_dissipative.value_or(true));
  }
  if (c.kind == "sign") {
    b = VectorField<double>::sign(d);
    return c.scale == 1.0 ? b : c.scale * b;
  }
  if (c.kind == "constant") {
    Point<double> v(d);
    for (int i = 0; i < d; ++i) v[i] = c.scale * c.vector[static_cast<std::size_t>(i)];
    return VectorField<double>::constant(v);
  }
  // tabulated: CSV with d coordinate columns then d value columns, one row per node
  const Grid<double> grid(d, c.table_radius, c.table_points);
  std::ifstream in(c.file);
  if (!in) throw ConfigError("drift.file", "cannot open '" + c.file + "'");
  MatrixX<double> values = MatrixX<double>::Constant(grid.size(), d, std::numeric_limits<double>::quiet_NaN());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    boost::trim(line);
    if (line.empty()) continue;
    const auto cols = Section::tokens(line);
    if (cols.size() != static_cast<std::size_t>(2 * d))
      throw ConfigError("drift.file", "row '" + line + "' needs " + std::to_string(2 * d) + " columns");
    typename Grid<double>::MultiIndex idx{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      const double x = Section::parse_real(cols[static_cast<std::size_t>(k)], "drift.file");
      const double pos = (x + c.table_radius) / grid.spacing();
      const auto r = std::llround(pos);
      if (std::abs(pos - static_cast<double>(r)) > 1e-6 || r < 0 || r >= c.table_points)
        throw ConfigError("drift.file", "coordinate " + cols[static_cast<std::size_t>(k)] + " is not a table node");
      idx[static_cast<std::size_t>(k)] = r;
    }
    for (int k = 0; k < d; ++k)
      values(grid.node(idx), k) = c.scale * Section::parse_real(cols[static_cast<std::size_t>(d + k)], "drift.file");
  }
  if (!values.allFinite()) throw ConfigError("drift.file", "table does not cover every node");
  return VectorField<double>::tabulated(grid, values, c.declared_dissipative.value_or(false));
}

VectorField<double> base_drift(const Scenario& s) { return build_drift(s.drift, s.dimension); }

VectorField<double> effective_drift(const Scenario& s) {
  auto b = base_drift(s);
  return s.regularization_k ? regularized_drift(b, *s.regularization_k) : b;
}

std::optional<CoefficientSchedule<double>> schedule_of(const Scenario& s) {
  if (!s.has_schedule()) return std::nullopt;
  CoefficientSchedule<double> out;
  out.breakpoints = s.breakpoints;
  for (std::size_t k = 0; k < s.pieces.size(); ++k) {
    const auto field = "schedule.piece" + std::to_string(k + 1) + ".diffusion";
    out.diffusion.push_back(diffusion_from(s.pieces[k].diffusion, s.dimension, field));
    out.drift.push_back(build_drift(s.pieces[k].drift, s.dimension));
  }
  return out;
}

std::vector<TestFunction<double>> test_functions_of(const Scenario& s) {
  Point<double> a(s.dimension);
  for (int i = 0; i < s.dimension; ++i) a[i] = s.slope[static_cast<std::size_t>(i)];
  std::vector<TestFunction<double>> out;
  for (const auto& f : s.functions) {
    if (f.family == "constant") out.push_back(TestFunction<double>::constant(s.dimension, 1.0));
    else if (f.family == "linear") out.push_back(TestFunction<double>::linear(a));
    else if (f.family == "sine") out.push_back(TestFunction<double>::sine(a));
    else if (f.family == "bump") out.push_back(TestFunction<double>::bump(Point<double>::Zero(s.dimension), s.bump_radius));
    else out.push_back(TestFunction<double>::clipped_linear(a, s.clip_n));
  }
  return out;
}

double truncation_radius(const Scenario& s) {
  if (s.radius) return *s.radius;
  try {
    return 1.5 * suggest_truncation(Lyapunov<double>(s.lyapunov_power), diffusion_of(s), effective_drift(s),
                                    s.lyapunov_theta);
  } catch (const LyapunovFailure& e) {
    throw ConfigError("grid.radius", std::string("'auto' needs a Lyapunov function: ") + e.what());
  }
}

Index points_at_level(const Scenario& s, int level) { return (s.points - 1) * (Index(1) << level) + 1; }

}  // namespace gradlab::app
