#include "conc/harness.hpp"

#include <algorithm>
#include <cassert>
#include <thread>
#include <tuple>
#include <utility>

#include "scenarios.hpp"

namespace conc::harness {

using namespace std::chrono_literals;
using std::chrono::milliseconds;
using std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

const char* to_string(ModelId m) {
  switch (m) {
    case ModelId::Atoms: return "atoms";
    case ModelId::Agents: return "agents";
    case ModelId::Refs: return "refs";
    case ModelId::FutProm: return "futures-promises";
    case ModelId::Channels: return "channels";
  }
  return "?";
}

const char* outer_tag(ModelId m) {
  return m == ModelId::FutProm ? "futures" : to_string(m);
}

const char* inner_tag(ModelId m) {
  return m == ModelId::FutProm ? "futprom" : to_string(m);
}

std::optional<ModelId> model_from_string(const std::string& s) {
  for (ModelId m : kModels) {
    if (s == to_string(m) || s == outer_tag(m) || s == inner_tag(m)) return m;
  }
  return std::nullopt;
}

const char* to_string(Property p) {
  return p == Property::Safety ? "safety" : "liveness";
}

std::optional<Property> property_from_string(const std::string& s) {
  if (s == "safety") return Property::Safety;
  if (s == "liveness") return Property::Liveness;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

namespace {

std::string kind_label(Verdict::Kind kind, const std::optional<ErrorKind>& error) {
  switch (kind) {
    case Verdict::Kind::OK: return "OK";
    case Verdict::Kind::RaceObserved: return "RaceObserved";
    case Verdict::Kind::DeadlockDetected: return "DeadlockDetected";
    case Verdict::Kind::LivelockSuspected: return "LivelockSuspected";
    case Verdict::Kind::ErrorRaised:
      return error ? std::string("ErrorRaised(") + to_string(*error) + ")"
                   : std::string("ErrorRaised");
  }
  return "?";
}

}  // namespace

std::string Verdict::label() const { return kind_label(kind, error); }

std::string Verdict::describe() const {
  return detail.empty() ? label() : label() + ": " + detail;
}

std::string Expected::label() const { return kind_label(kind, error); }

// ---------------------------------------------------------------------------
// Scenario environment
// ---------------------------------------------------------------------------

AtomPtr<ScenarioEnv::I> ScenarioEnv::atom(I initial) {
  auto a = make_atom<I>(initial);
  std::lock_guard lk(m_);
  atoms_.push_back(a);
  return a;
}

AgentPtr<ScenarioEnv::I> ScenarioEnv::agent(I initial) {
  auto a = make_agent<I>(initial);
  std::lock_guard lk(m_);
  agents_.push_back(a);
  return a;
}

RefPtr<ScenarioEnv::I> ScenarioEnv::ref(I initial) {
  auto r = make_ref<I>(initial);
  std::lock_guard lk(m_);
  refs_.push_back(r);
  return r;
}

ChannelPtr<ScenarioEnv::I> ScenarioEnv::channel() {
  auto c = make_channel<I>();
  std::lock_guard lk(m_);
  channels_.push_back(c);
  return c;
}

detect::GatePtr ScenarioEnv::gate() {
  auto g = detect::make_gate();
  std::lock_guard lk(m_);
  gates_.push_back(g);
  return g;
}

Promise<ScenarioEnv::I> ScenarioEnv::promise() {
  Promise<I> p;
  std::lock_guard lk(m_);
  promises_.push_back(p);
  return p;
}

Future<ScenarioEnv::I> ScenarioEnv::future(std::function<I()> body) {
  auto f = spawn_future(std::move(body));
  std::lock_guard lk(m_);
  futures_.push_back(f);
  return f;
}

ChannelPtr<ScenarioEnv::I> ScenarioEnv::go_unit(std::function<I()> body) {
  auto ch = go(std::move(body));
  std::lock_guard lk(m_);
  go_results_.push_back(ch);
  return ch;
}

detect::UnitHandle& ScenarioEnv::spawn(std::function<void()> body) {
  auto handle = detect::spawn_unit(ScopeKind::top_level(), std::move(body));
  std::lock_guard lk(m_);
  units_.push_back(std::move(handle));
  return units_.back();
}

void ScenarioEnv::note(std::string text) {
  std::lock_guard lk(m_);
  notes_.push_back(std::move(text));
}

std::vector<std::string> ScenarioEnv::notes() const {
  std::lock_guard lk(m_);
  return notes_;
}

// ---------------------------------------------------------------------------
// Forced retries
// ---------------------------------------------------------------------------

long long swap_with_forced_retries(const AtomPtr<long long>& a, int retries,
                                   const std::function<long long(long long)>& f) {
  auto attempt = std::make_shared<int>(0);
  return a->swap([a, retries, attempt, &f](long long cur) {
    int n = ++*attempt;
    // A same-value reset still bumps the version, so the install step below
    // sees a conflict and re-runs the function.
    if (n <= retries) a->reset(a->deref());
    return f(cur);
  });
}

long long transaction_with_forced_retries(const RefPtr<long long>& pivot, int retries,
                                          const std::function<long long()>& body) {
  return stm::transaction([&]() -> long long {
    pivot->deref();
    if (stm::current_attempt() <= static_cast<std::uint64_t>(retries)) {
      // A committed same-value write on the pivot invalidates this attempt's
      // read set at commit time.
      auto h = detect::spawn_unit(ScopeKind::top_level(), [pivot] {
        stm::transaction([&] { pivot->alter([](long long v) { return v; }); });
      });
      h.join();
    }
    return body();
  });
}

// ---------------------------------------------------------------------------
// Script helpers
// ---------------------------------------------------------------------------

namespace scripts {

bool poll_until(const std::function<bool()>& pred, milliseconds budget) {
  const auto deadline = steady_clock::now() + budget;
  for (;;) {
    if (pred()) return true;
    if (steady_clock::now() >= deadline) return false;
    poll_cancel();
    std::this_thread::sleep_for(2ms);
  }
}

}  // namespace scripts

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

namespace {

int model_rank(ModelId m) { return static_cast<int>(m); }

bool spec_before(const ScenarioSpec& a, const ScenarioSpec& b) {
  return std::make_tuple(model_rank(a.outer), model_rank(a.inner),
                         static_cast<int>(a.property), std::cref(a.id)) <
         std::make_tuple(model_rank(b.outer), model_rank(b.inner),
                         static_cast<int>(b.property), std::cref(b.id));
}

}  // namespace

const std::vector<ScenarioSpec>& catalog() {
  static const std::vector<ScenarioSpec> specs = [] {
    std::vector<ScenarioSpec> v;
    append_safety_scenarios(v);
    append_liveness_scenarios(v);
    std::stable_sort(v.begin(), v.end(), spec_before);
    return v;
  }();
  return specs;
}

const ScenarioSpec* find_scenario(const std::string& id) {
  for (const auto& spec : catalog()) {
    if (spec.id == id) return &spec;
  }
  return nullptr;
}

std::vector<const ScenarioSpec*> scenario_list(const ListFilter& filter) {
  std::vector<const ScenarioSpec*> out;
  for (const auto& spec : catalog()) {
    if (filter.property && spec.property != *filter.property) continue;
    if (filter.outer && spec.outer != *filter.outer) continue;
    if (filter.inner && spec.inner != *filter.inner) continue;
    out.push_back(&spec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

ScenarioResult scenario_run(const ScenarioSpec& spec, const RunConfig& config) {
  if (mode() != config.mode) set_mode(config.mode);

  ScenarioResult out;
  out.id = spec.id;
  out.mode = config.mode;

  const auto t0 = steady_clock::now();
  Verdict verdict;
  {
    detect::Session session(
        {config.seed, config.retry_threshold, config.quiescence_window});

    struct ScriptOut {
      std::mutex m;
      bool done = false;
      Verdict v;
    };
    auto script_out = std::make_shared<ScriptOut>();

    ScenarioEnv env;
    detect::UnitHandle script_unit = detect::spawn_unit(
        ScopeKind::top_level(), [script_out, script = spec.script, &env] {
          Verdict v;
          try {
            v = script(env);
          } catch (const ConcurrencyError& e) {
            v = Verdict::raised(e.kind(), e.what());
          } catch (const std::exception& e) {
            v = Verdict::raised(ErrorKind::Internal, e.what());
          }
          std::lock_guard lk(script_out->m);
          script_out->v = std::move(v);
          script_out->done = true;
        });

    for (;;) {
      std::this_thread::sleep_for(2ms);
      {
        std::lock_guard lk(script_out->m);
        if (script_out->done && session.settled()) {
          verdict = script_out->v;
          break;
        }
      }
      auto swap_wd = detect::watchdog_check(detect::RetryKind::SwapRetry,
                                            config.retry_threshold);
      if (swap_wd.suspected) {
        verdict = Verdict::livelock(swap_wd.evidence);
        break;
      }
      auto txn_wd = detect::watchdog_check(detect::RetryKind::TxnRetry,
                                           config.retry_threshold);
      if (txn_wd.suspected) {
        verdict = Verdict::livelock(txn_wd.evidence);
        break;
      }
      auto probe = detect::deadlock_probe(config.quiescence_window);
      if (probe.detected) {
        verdict = Verdict::deadlock(probe.evidence);
        break;
      }
      if (steady_clock::now() - t0 >= config.timeout) {
        verdict = Verdict::raised(ErrorKind::ScenarioTimeout,
                                  "no verdict within the configured wall clock");
        break;
      }
    }

    session.cancel();
    session.wait_settled(5000ms);
    if (auto stray = detect::take_stray_error()) {
      verdict.detail += (verdict.detail.empty() ? "" : "; ");
      verdict.detail += "stray unit error: " + stray->second;
    }
    // script_unit then env go out of scope here, joining every spawned unit
    // before the session teardown re-checks membership.
  }

  const Expected& expected =
      config.mode == Mode::Faithful ? spec.faithful : spec.guarded;
  out.observed = std::move(verdict);
  out.expected_label = expected.label();
  out.matched = expected.matches(out.observed);
  out.duration = std::min(
      std::chrono::duration_cast<milliseconds>(steady_clock::now() - t0),
      config.timeout);
  return out;
}

ScenarioResult scenario_run(const std::string& id, const RunConfig& config) {
  const ScenarioSpec* spec = find_scenario(id);
  if (!spec) raise(ErrorKind::UnknownScenario, id);
  return scenario_run(*spec, config);
}

}  // namespace conc::harness
