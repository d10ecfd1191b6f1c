#include <array>
#include <mutex>

#include "conc/harness.hpp"

namespace conc::harness {

namespace {

// Expected classification under faithful semantics, row = outer model hosting
// the scope, column = inner model used inside it. true = issue.
constexpr std::array<std::array<bool, 5>, 5> kFaithfulSafety = {{
    // atoms  agents refs   futprom channels
    {true, true, true, true, true},       // atoms
    {false, false, false, false, false},  // agents
    {true, false, false, true, true},     // refs
    {false, false, false, false, false},  // futures-promises
    {false, false, false, false, false},  // channels
}};

constexpr std::array<std::array<bool, 5>, 5> kFaithfulLiveness = {{
    // atoms  agents refs   futprom channels
    {false, false, false, false, true},  // atoms
    {false, false, false, true, true},   // agents
    {false, false, false, false, true},  // refs
    {false, true, false, true, true},    // futures-promises
    {false, true, false, false, true},   // channels
}};

}  // namespace

bool expected_issue_faithful(Property p, ModelId outer, ModelId inner) {
  const auto& table = p == Property::Safety ? kFaithfulSafety : kFaithfulLiveness;
  return table[static_cast<std::size_t>(outer)][static_cast<std::size_t>(inner)];
}

bool expected_issue_guarded(Property p, ModelId outer, ModelId inner) {
  // Derived once from the pinned per-scenario expectations: a guarded cell is
  // an issue cell iff any of its cell scenarios still expects an issue verdict.
  static const auto tables = [] {
    std::array<std::array<std::array<bool, 5>, 5>, 2> t{};
    for (const auto& spec : catalog()) {
      if (!spec.cell_scenario) continue;
      auto& cell = t[static_cast<std::size_t>(spec.property)]
                    [static_cast<std::size_t>(spec.outer)]
                    [static_cast<std::size_t>(spec.inner)];
      cell = cell || spec.guarded.issue();
    }
    return t;
  }();
  return tables[static_cast<std::size_t>(p)][static_cast<std::size_t>(outer)]
               [static_cast<std::size_t>(inner)];
}

MatrixReport matrix_run(Mode mode, Selection which, const RunConfig& base) {
  RunConfig config = base;
  config.mode = mode;

  MatrixReport report;
  report.mode = mode;
  report.config = config;
  report.pass = true;

  const std::array<Property, 2> properties = {Property::Safety, Property::Liveness};
  for (Property property : properties) {
    if (which == Selection::SafetyOnly && property != Property::Safety) continue;
    if (which == Selection::LivenessOnly && property != Property::Liveness) continue;
    for (ModelId outer : kModels) {
      for (ModelId inner : kModels) {
        CellResult cell;
        cell.property = property;
        cell.outer = outer;
        cell.inner = inner;
        cell.expected_issue = mode == Mode::Faithful
                                  ? expected_issue_faithful(property, outer, inner)
                                  : expected_issue_guarded(property, outer, inner);
        for (const ScenarioSpec* spec : scenario_list({property, outer, inner})) {
          if (!spec->cell_scenario) continue;
          ScenarioResult result = scenario_run(*spec, config);
          cell.scenario_ids.push_back(result.id);
          cell.observed_labels.push_back(result.observed.label());
          cell.observed_issue = cell.observed_issue || result.observed.issue();
          cell.all_matched = cell.all_matched && result.matched;
          cell.duration += result.duration;
        }
        report.pass = report.pass && cell.pass();
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

}  // namespace conc::harness
