#ifndef GRADLAB_APP_SCENARIO_HPP
#define GRADLAB_APP_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradlab/gradlab.hpp"

namespace gradlab::app {

/// Configuration error that names the offending `section.key`.
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidInput("scenario field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DriftConfig {
  /// linear | polynomial-gradient | sign | constant | tabulated
  std::string kind = "linear";
  std::vector<double> matrix;
  std::vector<Monomial<double>> terms;
  std::vector<double> vector;
  double scale = 1.0;
  std::string file;
  double table_radius = 0;
  Index table_points = 0;
  std::optional<bool> declared_dissipative;
};

struct TestFunctionConfig {
  /// constant | linear | sine | bump | clipped_linear
  std::string family;
};

struct SchedulePiece {
  DriftConfig drift;
  std::vector<double> diffusion;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string source;
  int dimension = 1;
  std::uint64_t seed = 20240601;
  std::size_t samples = 200;

  std::vector<double> diffusion;
  DriftConfig drift;
  std::optional<int> regularization_k;
  std::vector<int> k_sequence;

  int lyapunov_power = 1;
  double lyapunov_theta = 1.0;

  /// empty = "auto"
  std::optional<double> radius;
  Index points = 101;
  int levels = 3;

  std::vector<TestFunctionConfig> functions;
  std::vector<double> slope;
  double clip_n = 1.0;
  double bump_radius = 1.0;
  std::vector<double> times;
  std::vector<double> lambdas;
  Index steps = 32;
  double slack_factor = 10.0;
  bool gate_theorem_form = false;
  bool markov = true;
  bool invariant_measure = true;
  /// none | ou
  std::string oracle = "none";
  std::vector<double> dual_reference;

  std::vector<double> breakpoints;
  std::vector<SchedulePiece> pieces;
  Index steps_per_interval = 8;

  std::string output_dir;

  bool has_schedule() const { return !pieces.empty(); }
};

Scenario parse_scenario(std::istream& in, const std::string& source);
Scenario load_scenario(const std::string& path);

/// A path as given, or the bundled scenario of that name.
std::string resolve_scenario_path(const std::string& name_or_path);

/// (name, description) of every bundled scenario, sorted by name.
std::vector<std::pair<std::string, std::string>> bundled_scenarios();

// Numerical objects described by a scenario.
DiffusionMatrix<double> diffusion_of(const Scenario& s);
VectorField<double> build_drift(const DriftConfig& c, int dimension);
/// drift of the elliptic operator before regularization
VectorField<double> base_drift(const Scenario& s);
/// base drift, replaced by b_k when regularization.k is set
VectorField<double> effective_drift(const Scenario& s);
std::optional<CoefficientSchedule<double>> schedule_of(const Scenario& s);
std::vector<TestFunction<double>> test_functions_of(const Scenario& s);
/// radius from the config or, for "auto", 1.5 suggest_truncation(theta)
double truncation_radius(const Scenario& s);
Index points_at_level(const Scenario& s, int level);

}  // namespace gradlab::app

#endif  // GRADLAB_APP_SCENARIO_HPP
