#ifndef GRADLAB_APP_RUNNER_HPP
#define GRADLAB_APP_RUNNER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenario.hpp"

namespace gradlab::app {

using Json = nlohmann::ordered_json;

struct RunOptions {
  std::optional<std::uint64_t> seed;
  /// 0 = hardware concurrency
  unsigned threads = 0;
};

/// One entry of the report. Gating entries decide the exit code.
struct CheckResult {
  std::string name;
  std::string category;
  bool gating = true;
  bool pass = true;
  std::string note;
  Json detail = Json::object();
};

/// Per-node (or per-parameter) margins of one check at the finest level.
struct MarginTable {
  std::string check;
  /// one row per entry: coordinates (or the parameter) of the entry
  std::vector<std::vector<double>> coordinates;
  std::vector<std::string> coordinate_names;
  NodeValues<double> lhs, rhs, margin;
};

struct RunResult {
  Scenario scenario;
  std::vector<CheckResult> hypotheses;
  std::vector<CheckResult> checks;
  std::vector<MarginTable> margins;

  bool pass() const;
  /// 0 when every gating entry passes, 2 otherwise
  int exit_code() const { return pass() ? 0 : 2; }
  const CheckResult* find(const std::string& name) const;
};

/// Validates (Ha)-(Hc), runs every requested check at every refinement level.
RunResult run_scenario(Scenario scenario, const RunOptions& options = {});

// report.cpp
Json scenario_echo(const Scenario& s);
Json summary_json(const RunResult& r);
/// summary.json plus margins_<check>.csv
void write_report(const RunResult& r, const std::string& dir);

// sweep.cpp
struct SweepRow {
  double value = 0;
  Index points = 0;
  double h = 0;
  Index steps = 0;
  double max_violation = 0;
  double max_tolerance = 0;
  std::optional<double> oracle_error;
  /// k axis: sup |G^(k) f - G f| on the inner box, G without regularization
  std::optional<double> resolvent_distance;
  /// k axis: sup |G^(k) f - G^(k_prev) f| on the inner box
  std::optional<double> resolvent_change;
  std::optional<double> order;
  bool pass = true;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  bool pass() const;
};

/// axis is one of k, h, n_steps, lambda
SweepResult run_sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values,
                      const RunOptions& options = {});
void write_sweep_csv(const SweepResult& s, const std::string& path);

}  // namespace gradlab::app

#endif  // GRADLAB_APP_RUNNER_HPP
