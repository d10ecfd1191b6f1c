#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "conc/agent.hpp"
#include "conc/atom.hpp"
#include "conc/channel.hpp"
#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "conc/future.hpp"
#include "conc/stm.hpp"

namespace conc::harness {

// ---------------------------------------------------------------------------
// Models, properties, verdicts
// ---------------------------------------------------------------------------

enum class ModelId { Atoms, Agents, Refs, FutProm, Channels };

inline constexpr std::array<ModelId, 5> kModels = {
    ModelId::Atoms, ModelId::Agents, ModelId::Refs, ModelId::FutProm, ModelId::Channels};

const char* to_string(ModelId m);        // canonical: "futures-promises"
const char* outer_tag(ModelId m);        // id segment when used as row: "futures"
const char* inner_tag(ModelId m);        // id segment when used as column: "futprom"
std::optional<ModelId> model_from_string(const std::string& s);

enum class Property { Safety, Liveness };

const char* to_string(Property p);
std::optional<Property> property_from_string(const std::string& s);

struct Verdict {
  enum class Kind { OK, RaceObserved, DeadlockDetected, LivelockSuspected, ErrorRaised };

  Kind kind = Kind::OK;
  std::optional<ErrorKind> error;  // set iff kind == ErrorRaised
  std::string detail;              // race detail / detector evidence / error text

  // Race, deadlock and livelock count against a cell; OK and ErrorRaised
  // (prevention) do not.
  bool issue() const {
    return kind == Kind::RaceObserved || kind == Kind::DeadlockDetected ||
           kind == Kind::LivelockSuspected;
  }

  std::string label() const;     // "RaceObserved", "ErrorRaised(AwaitProhibited)"
  std::string describe() const;  // label plus detail

  static Verdict ok(std::string detail = {}) { return {Kind::OK, std::nullopt, std::move(detail)}; }
  static Verdict race(std::string detail) {
    return {Kind::RaceObserved, std::nullopt, std::move(detail)};
  }
  static Verdict deadlock(std::string evidence) {
    return {Kind::DeadlockDetected, std::nullopt, std::move(evidence)};
  }
  static Verdict livelock(std::string evidence) {
    return {Kind::LivelockSuspected, std::nullopt, std::move(evidence)};
  }
  static Verdict raised(ErrorKind kind, std::string detail = {}) {
    return {Kind::ErrorRaised, kind, std::move(detail)};
  }
};

// Pinned per-mode expectation of a scenario: a verdict kind, plus the error
// kind when an error is the expected outcome.
struct Expected {
  Verdict::Kind kind = Verdict::Kind::OK;
  std::optional<ErrorKind> error;

  bool matches(const Verdict& v) const {
    if (v.kind != kind) return false;
    return kind != Verdict::Kind::ErrorRaised || v.error == error;
  }
  bool issue() const {
    return kind == Verdict::Kind::RaceObserved || kind == Verdict::Kind::DeadlockDetected ||
           kind == Verdict::Kind::LivelockSuspected;
  }
  std::string label() const;

  static Expected ok() { return {Verdict::Kind::OK, std::nullopt}; }
  static Expected race() { return {Verdict::Kind::RaceObserved, std::nullopt}; }
  static Expected deadlock() { return {Verdict::Kind::DeadlockDetected, std::nullopt}; }
  static Expected livelock() { return {Verdict::Kind::LivelockSuspected, std::nullopt}; }
  static Expected raised(ErrorKind k) { return {Verdict::Kind::ErrorRaised, k}; }
};

// ---------------------------------------------------------------------------
// Scenario environment
// ---------------------------------------------------------------------------

// Owns every model object and auxiliary unit a script creates, so teardown
// happens in one place after the session has cancelled all members. Value type
// is fixed to long long; scripts express everything as counters and tags.
class ScenarioEnv {
 public:
  using I = long long;

  ScenarioEnv() = default;
  ScenarioEnv(const ScenarioEnv&) = delete;
  ScenarioEnv& operator=(const ScenarioEnv&) = delete;

  AtomPtr<I> atom(I initial);
  AgentPtr<I> agent(I initial);
  RefPtr<I> ref(I initial);
  ChannelPtr<I> channel();
  detect::GatePtr gate();
  Promise<I> promise();
  Future<I> future(std::function<I()> body);
  ChannelPtr<I> go_unit(std::function<I()> body);
  detect::UnitHandle& spawn(std::function<void()> body);

  void note(std::string text);
  std::vector<std::string> notes() const;

 private:
  mutable std::mutex m_;
  std::vector<AtomPtr<I>> atoms_;
  std::vector<AgentPtr<I>> agents_;
  std::vector<RefPtr<I>> refs_;
  std::vector<ChannelPtr<I>> channels_;
  std::vector<detect::GatePtr> gates_;
  std::vector<Promise<I>> promises_;
  std::vector<Future<I>> futures_;
  std::vector<ChannelPtr<I>> go_results_;
  std::deque<detect::UnitHandle> units_;
  std::vector<std::string> notes_;
};

// ---------------------------------------------------------------------------
// Forced retries
// ---------------------------------------------------------------------------

// Runs f as a swap function on a, deterministically forcing `retries`
// re-executions by bumping the atom's version from inside the first attempts.
long long swap_with_forced_retries(const AtomPtr<long long>& a, int retries,
                                   const std::function<long long(long long)>& f);

// Runs body in a transaction that reads pivot, deterministically forcing
// `retries` re-executions by committing a conflicting write on pivot from a
// helper unit during the first attempts.
long long transaction_with_forced_retries(const RefPtr<long long>& pivot, int retries,
                                          const std::function<long long()>& body);

// ---------------------------------------------------------------------------
// Scenario catalog
// ---------------------------------------------------------------------------

struct ScenarioSpec {
  std::string id;      // e.g. S-atoms-agents, L-refs-channels-gospawn
  ModelId outer;       // the model whose dynamic scope hosts the inner ops
  ModelId inner;       // the model used inside it
  Property property;
  std::string exhibit;  // non-empty for canonical named programs, unique each
  bool cell_scenario = true;  // counts toward the cell verdict in matrix runs
  Expected faithful;
  Expected guarded;
  std::string summary;
  std::function<Verdict(ScenarioEnv&)> script;
};

const std::vector<ScenarioSpec>& catalog();
const ScenarioSpec* find_scenario(const std::string& id);

struct ListFilter {
  std::optional<Property> property;
  std::optional<ModelId> outer;
  std::optional<ModelId> inner;
};

// Catalog subset in deterministic (outer, inner, property, id) order.
std::vector<const ScenarioSpec*> scenario_list(const ListFilter& filter = {});

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct RunConfig {
  Mode mode = Mode::Faithful;
  std::chrono::milliseconds timeout{10000};
  std::uint64_t retry_threshold = 1000;
  std::chrono::milliseconds quiescence_window{500};
  std::uint64_t seed = 42;
};

struct ScenarioResult {
  std::string id;
  Mode mode = Mode::Faithful;
  Verdict observed;
  std::string expected_label;
  bool matched = false;
  std::chrono::milliseconds duration{0};
};

// Runs one scenario on fresh model instances under a detector session. The
// driver polls the watchdog and the deadlock probe while the script runs;
// every unit is cancelled and joined before this returns. A wall-clock
// overrun yields ErrorRaised(ScenarioTimeout) as the observed verdict.
ScenarioResult scenario_run(const ScenarioSpec& spec, const RunConfig& config);
// Raises UnknownScenario for an id not in the catalog.
ScenarioResult scenario_run(const std::string& id, const RunConfig& config);

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

// Transcribed expected classification, faithful semantics: true = issue.
bool expected_issue_faithful(Property p, ModelId outer, ModelId inner);
// Derived from the pinned per-scenario guarded expectations of cell scenarios.
bool expected_issue_guarded(Property p, ModelId outer, ModelId inner);

struct CellResult {
  Property property = Property::Safety;
  ModelId outer = ModelId::Atoms;
  ModelId inner = ModelId::Atoms;
  bool expected_issue = false;
  bool observed_issue = false;
  bool all_matched = true;  // every member scenario matched its pinned verdict
  std::vector<std::string> scenario_ids;
  std::vector<std::string> observed_labels;
  std::chrono::milliseconds duration{0};

  bool pass() const { return all_matched && observed_issue == expected_issue; }
};

enum class Selection { SafetyOnly, LivenessOnly, All };

struct MatrixReport {
  Mode mode = Mode::Faithful;
  RunConfig config;
  std::vector<CellResult> cells;
  bool pass = false;
};

// Runs every cell scenario of the selected properties and aggregates per-cell
// verdicts. A cell passes when all its scenarios match their pinned
// expectations and the issue bit equals the expected classification.
MatrixReport matrix_run(Mode mode, Selection which, const RunConfig& base);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void report_emit_text(const MatrixReport& report, std::ostream& out);
std::string report_json(const MatrixReport& report);  // newline-terminated
std::string result_json(const ScenarioResult& result);

// format is "text" or "json"; empty out_path means stdout. Raises
// SinkUnwritable when the path cannot be opened or written.
void report_emit(const MatrixReport& report, const std::string& format,
                 const std::string& out_path);

}  // namespace conc::harness
