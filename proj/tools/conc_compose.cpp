#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "conc/harness.hpp"
#include "json.hpp"

namespace {

using namespace conc;
using namespace conc::harness;

Mode parse_mode(const std::string& s) {
  return s == "guarded" ? Mode::Guarded : Mode::Faithful;
}

Selection parse_selection(const std::string& s) {
  if (s == "safety") return Selection::SafetyOnly;
  if (s == "liveness") return Selection::LivenessOnly;
  return Selection::All;
}

// Writes body to out_path, or stdout when the path is empty.
void emit_string(const std::string& body, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << body << std::flush;
    return;
  }
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) raise(ErrorKind::SinkUnwritable, out_path);
  file << body;
  file.flush();
  if (!file.good()) raise(ErrorKind::SinkUnwritable, out_path);
}

std::string result_text(const ScenarioResult& result) {
  std::ostringstream os;
  os << result.id << " mode=" << to_string(result.mode)
     << " observed=" << result.observed.label() << " expected=" << result.expected_label
     << " matched=" << (result.matched ? "yes" : "no")
     << " duration_ms=" << result.duration.count() << "\n";
  if (!result.observed.detail.empty()) os << "  " << result.observed.detail << "\n";
  return os.str();
}

std::string list_text(const std::vector<const ScenarioSpec*>& specs) {
  std::ostringstream os;
  for (const auto* spec : specs) {
    os << spec->id << "  " << to_string(spec->property) << "  " << outer_tag(spec->outer)
       << "/" << inner_tag(spec->inner);
    if (!spec->exhibit.empty()) os << "  [" << spec->exhibit << "]";
    os << "\n    faithful=" << spec->faithful.label()
       << " guarded=" << spec->guarded.label() << "\n    " << spec->summary << "\n";
  }
  os << specs.size() << " scenarios\n";
  return os.str();
}

std::string list_json(const std::vector<const ScenarioSpec*>& specs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto* spec : specs) {
    nlohmann::ordered_json j;
    j["id"] = spec->id;
    j["property"] = to_string(spec->property);
    j["outer"] = to_string(spec->outer);
    j["inner"] = to_string(spec->inner);
    j["exhibit"] = spec->exhibit;
    j["cell_scenario"] = spec->cell_scenario;
    j["faithful"] = spec->faithful.label();
    j["guarded"] = spec->guarded.label();
    j["summary"] = spec->summary;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"composability harness for the multi-model concurrency runtime"};
  app.require_subcommand(0, 1);

  std::string mode_s = "faithful";
  std::string property_s = "all";
  std::string scenario_id;
  std::string format = "text";
  std::string out_path;
  std::uint64_t timeout_ms = 10000;
  std::uint64_t retry_threshold = 1000;
  std::uint64_t quiescence_ms = 500;
  std::uint64_t seed = 42;

  app.add_option("--mode", mode_s, "runtime mode")
      ->check(CLI::IsMember({"faithful", "guarded"}));
  app.add_option("--property", property_s, "matrix selection / list filter")
      ->check(CLI::IsMember({"safety", "liveness", "all"}));
  app.add_option("--scenario", scenario_id, "scenario id for the run subcommand");
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"text", "json"}));
  app.add_option("--out", out_path, "write the report to this path instead of stdout");
  app.add_option("--timeout-ms", timeout_ms, "per-scenario wall clock budget");
  app.add_option("--retry-threshold", retry_threshold, "watchdog re-execution threshold");
  app.add_option("--quiescence-ms", quiescence_ms, "deadlock probe stall window");
  app.add_option("--seed", seed, "session seed");

  auto* matrix_cmd = app.add_subcommand("matrix", "run the composability matrix (default)");
  auto* run_cmd = app.add_subcommand("run", "run a single scenario");
  auto* list_cmd = app.add_subcommand("list", "list known scenarios");
  matrix_cmd->fallthrough();
  run_cmd->fallthrough();
  list_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; any usage error exits 2
  }

  RunConfig config;
  config.mode = parse_mode(mode_s);
  config.timeout = std::chrono::milliseconds(timeout_ms);
  config.retry_threshold = retry_threshold;
  config.quiescence_window = std::chrono::milliseconds(quiescence_ms);
  config.seed = seed;

  try {
    if (list_cmd->parsed()) {
      ListFilter filter;
      if (property_s != "all") filter.property = property_from_string(property_s);
      auto specs = scenario_list(filter);
      emit_string(format == "json" ? list_json(specs) : list_text(specs), out_path);
      return 0;
    }

    if (run_cmd->parsed()) {
      if (scenario_id.empty()) {
        std::cerr << "run requires --scenario <id>\n";
        return 2;
      }
      const ScenarioSpec* spec = find_scenario(scenario_id);
      if (!spec) raise(ErrorKind::UnknownScenario, scenario_id);
      ScenarioResult result = scenario_run(*spec, config);
      emit_string(format == "json" ? result_json(result) : result_text(result), out_path);
      return result.matched ? 0 : 1;
    }

    (void)matrix_cmd;
    MatrixReport report = matrix_run(config.mode, parse_selection(property_s), config);
    report_emit(report, format, out_path);
    return report.pass ? 0 : 1;
  } catch (const ConcurrencyError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
