#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "conc/harness.hpp"
#include "json.hpp"

namespace conc::harness {

namespace {

const CellResult* cell_at(const MatrixReport& report, Property p, ModelId outer,
                          ModelId inner) {
  for (const auto& cell : report.cells) {
    if (cell.property == p && cell.outer == outer && cell.inner == inner) return &cell;
  }
  return nullptr;
}

bool has_property(const MatrixReport& report, Property p) {
  for (const auto& cell : report.cells) {
    if (cell.property == p) return true;
  }
  return false;
}

void emit_grid(const MatrixReport& report, Property p, std::ostream& out) {
  out << to_string(p) << " (rows: scope owner, columns: model used inside it)\n";
  out << std::left << std::setw(10) << "";
  for (ModelId inner : kModels) out << std::setw(10) << inner_tag(inner);
  out << "\n";
  for (ModelId outer : kModels) {
    out << std::setw(10) << outer_tag(outer);
    for (ModelId inner : kModels) {
      const CellResult* cell = cell_at(report, p, outer, inner);
      std::string glyph = !cell ? "-" : (cell->observed_issue ? "X" : "ok");
      if (cell && !cell->pass()) glyph += "!";
      out << std::setw(10) << glyph;
    }
    out << "\n";
  }
  out << "\n";
}

}  // namespace

void report_emit_text(const MatrixReport& report, std::ostream& out) {
  out << "composability matrix, mode=" << to_string(report.mode) << "\n";
  out << "config: timeout_ms=" << report.config.timeout.count()
      << " retry_threshold=" << report.config.retry_threshold
      << " quiescence_ms=" << report.config.quiescence_window.count()
      << " seed=" << report.config.seed << "\n\n";
  for (Property p : {Property::Safety, Property::Liveness}) {
    if (has_property(report, p)) emit_grid(report, p, out);
  }
  out << "legend: ok = no issue observed, X = issue observed, "
         "! = cell differs from its expected classification\n\n";
  for (const auto& cell : report.cells) {
    if (cell.pass()) continue;
    out << "mismatch " << to_string(cell.property) << " " << outer_tag(cell.outer)
        << "/" << inner_tag(cell.inner) << ": expected "
        << (cell.expected_issue ? "issue" : "ok") << ", observed "
        << (cell.observed_issue ? "issue" : "ok") << " [";
    for (std::size_t i = 0; i < cell.scenario_ids.size(); ++i) {
      if (i) out << ", ";
      out << cell.scenario_ids[i] << "=" << cell.observed_labels[i];
    }
    out << "]\n";
  }
  out << (report.pass ? "PASS" : "FAIL") << "\n";
}

std::string report_json(const MatrixReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(report.mode);
  j["config"] = {{"timeout_ms", report.config.timeout.count()},
                 {"retry_threshold", report.config.retry_threshold},
                 {"quiescence_ms", report.config.quiescence_window.count()},
                 {"seed", report.config.seed}};
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : report.cells) {
    nlohmann::ordered_json c;
    c["outer"] = to_string(cell.outer);
    c["inner"] = to_string(cell.inner);
    c["property"] = to_string(cell.property);
    c["expected"] = cell.expected_issue ? "issue" : "ok";
    c["observed"] = cell.observed_issue ? "issue" : "ok";
    c["scenario_ids"] = cell.scenario_ids;
    c["duration_ms"] = cell.duration.count();
    j["cells"].push_back(std::move(c));
  }
  j["pass"] = report.pass;
  return j.dump(2) + "\n";
}

std::string result_json(const ScenarioResult& result) {
  nlohmann::ordered_json j;
  j["id"] = result.id;
  j["mode"] = to_string(result.mode);
  j["observed"] = result.observed.label();
  j["expected"] = result.expected_label;
  j["matched"] = result.matched;
  j["detail"] = result.observed.detail;
  j["duration_ms"] = result.duration.count();
  return j.dump(2) + "\n";
}

void report_emit(const MatrixReport& report, const std::string& format,
                 const std::string& out_path) {
  std::string body;
  if (format == "json") {
    body = report_json(report);
  } else {
    std::ostringstream os;
    report_emit_text(report, os);
    body = os.str();
  }
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

}  // namespace conc::harness
