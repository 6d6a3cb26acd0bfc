#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "runner.hpp"

namespace fs = std::filesystem;
using namespace gradlab::app;

namespace {

std::string output_dir(const std::string& flag, const Scenario& s) {
  if (!flag.empty()) return flag;
  if (!s.output_dir.empty()) return s.output_dir;
  return (fs::path("gradlab-out") / s.name).string();
}

void print_run(const RunResult& r, const std::string& dir) {
  std::cout << "scenario " << r.scenario.name << '\n';
  for (const auto* list : {&r.hypotheses, &r.checks})
    for (const auto& c : *list) {
      const char* tag = !c.gating ? "INFO" : (c.pass ? "PASS" : "FAIL");
      std::cout << "  " << tag << "  " << c.name;
      if (c.gating && !c.pass && !c.note.empty()) std::cout << "  (" << c.note << ')';
      std::cout << '\n';
    }
  std::cout << (r.pass() ? "PASS" : "FAIL") << "  report written to " << dir << '\n';
}

void print_sweep(const SweepResult& s) {
  std::cout << std::setw(10) << s.axis << std::setw(8) << "points" << std::setw(15) << "max_violation"
            << std::setw(15) << "oracle_error" << std::setw(15) << "distance" << std::setw(15) << "change"
            << std::setw(12) << "order" << '\n';
  auto cell = [](const std::optional<double>& v, int w) {
    if (v) std::cout << std::setw(w) << *v;
    else std::cout << std::setw(w) << "-";
  };
  for (const auto& r : s.rows) {
    std::cout << std::setw(10) << r.value << std::setw(8) << r.points << std::setw(15) << r.max_violation;
    cell(r.oracle_error, 15);
    cell(r.resolvent_distance, 15);
    cell(r.resolvent_change, 15);
    cell(r.order, 12);
    std::cout << (r.pass ? "" : "  FAIL") << '\n';
  }
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("sweep.values", "'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("sweep.values", "value list is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradlab: discrete checks of gradient bounds for dissipative diffusions"};
  app.require_subcommand(1);

  std::string out_flag;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("--out", out_flag, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "sampling seed (overrides the scenario)");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* run = app.add_subcommand("run", "run one scenario");
  std::string run_file;
  run->add_option("file", run_file, "scenario file or bundled scenario name")->required();

  auto* sweep = app.add_subcommand("sweep", "rerun a scenario along one parameter axis");
  std::string sweep_file, axis;
  std::string values_text;
  sweep->add_option("file", sweep_file, "scenario file or bundled scenario name")->required();
  sweep->add_option("--axis", axis, "k | h | n_steps | lambda")->required();
  sweep->add_option("--values", values_text, "comma-separated values")->expected(0, 1)->required();

  app.add_subcommand("list-scenarios", "list bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  RunOptions options;
  if (*seed_opt) options.seed = seed;
  options.threads = threads;

  try {
    if (*run) {
      const auto s = load_scenario(resolve_scenario_path(run_file));
      const auto result = run_scenario(s, options);
      const auto dir = output_dir(out_flag, s);
      write_report(result, dir);
      print_run(result, dir);
      return result.exit_code();
    }
    if (*sweep) {
      const auto values = parse_values(values_text);
      const auto s = load_scenario(resolve_scenario_path(sweep_file));
      const auto result = run_sweep(s, axis, values, options);
      const auto dir = output_dir(out_flag, s);
      fs::create_directories(dir);
      write_sweep_csv(result, (fs::path(dir) / "sweep.csv").string());
      print_sweep(result);
      std::cout << (result.pass() ? "PASS" : "FAIL") << "  sweep written to " << (fs::path(dir) / "sweep.csv").string()
                << '\n';
      return result.pass() ? 0 : 2;
    }
    for (const auto& [name, description] : bundled_scenarios())
      std::cout << std::left << std::setw(24) << name << description << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
