// End-to-end acceptance checks for the runtime: matrix reproduction,
// named-program outcomes, guarded-mode mitigations, and the property suites.
// Prints one line per criterion and exits nonzero when any of them fail.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "conc/harness.hpp"
#include "props.hpp"

using namespace conc;
using namespace conc::harness;
using namespace std::chrono_literals;

namespace {

struct Criterion {
  int num = 0;
  bool pass = false;
  std::string detail;
};

struct Failure {
  std::string text;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw Failure{what};
}

void expect_prop(const props::CheckResult& r, const std::string& name) {
  if (!r.pass) throw Failure{name + ": " + r.detail};
}

std::string fingerprint(const MatrixReport& report) {
  std::ostringstream out;
  for (const auto& cell : report.cells) {
    out << to_string(cell.property) << '|' << outer_tag(cell.outer) << '|'
        << inner_tag(cell.inner) << '|' << cell.expected_issue << '|' << cell.observed_issue
        << '|' << cell.all_matched << '|';
    for (const auto& id : cell.scenario_ids) out << id << ',';
    out << '|';
    for (const auto& label : cell.observed_labels) out << label << ',';
    out << ';';
  }
  return out.str();
}

// Criteria 1 and 2: one property of the faithful matrix, reproduced exactly
// on every one of 20 runs, each run within the wall-time budget.
Criterion matrix_reproduction(int num, Selection which) {
  Criterion c{num, false, {}};
  const int runs = 20;
  std::string first;
  std::chrono::milliseconds total{0}, worst{0};
  for (int i = 0; i < runs; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto report = matrix_run(Mode::Faithful, which, RunConfig{});
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - t0);
    total += elapsed;
    worst = std::max(worst, elapsed);
    expect(elapsed < 60s, "run " + std::to_string(i + 1) + " took " +
                              std::to_string(elapsed.count()) + "ms (budget 60000ms)");
    expect(report.cells.size() == 25, "expected 25 cells, got " +
                                          std::to_string(report.cells.size()));
    for (const auto& cell : report.cells) {
      std::string where = std::string(outer_tag(cell.outer)) + "/" + inner_tag(cell.inner);
      expect(cell.all_matched, where + ": a scenario missed its pinned verdict");
      expect(cell.observed_issue == expected_issue_faithful(cell.property, cell.outer, cell.inner),
             where + ": observed issue bit diverges from the published classification");
    }
    expect(report.pass, "matrix report flagged failure");
    auto fp = fingerprint(report);
    if (i == 0) {
      first = fp;
    } else {
      expect(fp == first, "run " + std::to_string(i + 1) + " differs from run 1");
    }
  }
  c.pass = true;
  c.detail = "25/25 cells exact on all 20 runs; worst run " + std::to_string(worst.count()) +
             "ms, total " + std::to_string(total.count()) + "ms";
  return c;
}

const ScenarioSpec& by_exhibit(const std::string& name) {
  for (const auto& s : catalog()) {
    if (s.exhibit == name) return s;
  }
  throw Failure{"no scenario named " + name};
}

void expect_exhibit(const std::string& name, Verdict::Kind kind, Mode mode = Mode::Faithful) {
  RunConfig cfg;
  cfg.mode = mode;
  auto r = scenario_run(by_exhibit(name), cfg);
  expect(r.observed.kind == kind,
         name + ": expected " + Verdict{kind, {}, {}}.label() + ", observed " +
             r.observed.label() + " (" + r.observed.detail + ")");
  expect(r.matched, name + ": verdict did not match its pinned expectation");
}

Criterion named_program_fidelity() {
  Criterion c{3, false, {}};
  set_mode(Mode::Faithful);

  {  // An atom retry re-runs the send in the swap function: two sends.
    auto a = make_atom<long long>(0);
    auto ag = make_agent<long long>(0);
    swap_with_forced_retries(a, 1, [&](long long v) {
      ag->send([](long long n) { return n + 1; });
      return v + 1;
    });
    ag->await();
    expect(ag->deref() == 2, "swap with 1 forced retry sent " + std::to_string(ag->deref()) +
                                 " times, wanted 2");
  }
  {  // A transactional send is deferred to commit: one send despite retries.
    auto pivot = make_ref<long long>(0);
    auto ag = make_agent<long long>(0);
    transaction_with_forced_retries(pivot, 5, [&]() -> long long {
      ag->send([](long long n) { return n + 1; });
      return 0;
    });
    ag->await();
    expect(ag->deref() == 1, "transaction with 5 forced retries sent " +
                                 std::to_string(ag->deref()) + " times, wanted 1");
  }
  {  // A cross-atom write inside a swap function is applied once per attempt.
    auto a = make_atom<long long>(60);
    auto b = make_atom<long long>(40);
    swap_with_forced_retries(a, 1, [&](long long v) {
      b->reset(b->deref() - 10);
      return v + 10;
    });
    long long sum = a->deref() + b->deref();
    expect(sum != 100, "invariant sum survived the forced schedule");
    expect(sum == 90, "unexpected torn sum " + std::to_string(sum));
  }
  {  // Second promise delivery loses.
    Promise<long long> p;
    expect(p.deliver(1), "first deliver must win");
    expect(!p.deliver(2), "second deliver must lose");
    expect(p.future().deref() == 1, "promise kept the wrong value");
  }

  expect_exhibit("torn-invariant", Verdict::Kind::RaceObserved);
  expect_exhibit("reentrant-swap-livelock", Verdict::Kind::LivelockSuspected);
  expect_exhibit("cross-swap-terminates", Verdict::Kind::OK);
  // The await-in-swap program never stops retrying, so the watchdog (not the
  // wait-for probe) is the detector that flags it.
  expect_exhibit("await-in-swap-livelock", Verdict::Kind::LivelockSuspected);
  expect_exhibit("await-before-put-deadlock", Verdict::Kind::DeadlockDetected);
  expect_exhibit("await-deref-cycle", Verdict::Kind::DeadlockDetected);
  expect_exhibit("promise-self-deadlock", Verdict::Kind::DeadlockDetected);
  expect_exhibit("mutual-future-deadlock", Verdict::Kind::DeadlockDetected);

  c.pass = true;
  c.detail =
      "direct programs and all named scenarios produced their documented outcomes "
      "(the await-in-swap retry storm is flagged by the watchdog as a livelock)";
  return c;
}

struct ModeGuard {
  Mode saved = mode();
  ~ModeGuard() { set_mode(saved); }
};

Criterion guarded_mitigations() {
  Criterion c{4, false, {}};
  ModeGuard guard;
  set_mode(Mode::Guarded);

  for (int retries : {0, 1, 5}) {  // (a) exactly-once sends and delivers
    auto pivot = make_ref<long long>(0);
    auto ag = make_agent<long long>(0);
    Promise<long long> p;
    transaction_with_forced_retries(pivot, retries, [&]() -> long long {
      ag->send([](long long n) { return n + 1; });
      p.deliver(static_cast<long long>(stm::current_attempt()));
      return 0;
    });
    ag->await();
    expect(ag->deref() == 1, "retries=" + std::to_string(retries) + ": " +
                                 std::to_string(ag->deref()) + " sends, wanted 1");
    long long delivered = p.future().deref();
    expect(delivered == retries + 1,
           "retries=" + std::to_string(retries) + ": delivered attempt " +
               std::to_string(delivered) + ", wanted the committing attempt " +
               std::to_string(retries + 1));
    expect(!p.deliver(999), "a later deliver must lose");
  }

  {  // (b) await is rejected inside transactions and agent actions
    auto ag = make_agent<long long>(0);
    bool raised = false;
    try {
      stm::transaction([&]() -> long long {
        ag->await();
        return 0;
      });
    } catch (const ConcurrencyError& e) {
      raised = (e.kind() == ErrorKind::AwaitProhibited);
    }
    expect(raised, "await inside a transaction did not raise AwaitProhibited");

    auto actor = make_agent<long long>(0);
    actor->send([ag](long long v) {
      ag->await();
      return v;
    });
    bool failed = false;
    for (int i = 0; i < 2500 && !failed; ++i) {
      failed = actor->failed();
      std::this_thread::sleep_for(2ms);
    }
    expect(failed, "await inside an agent action did not fail the agent");
    expect(actor->error().value_or("").find(to_string(ErrorKind::AwaitProhibited)) !=
               std::string::npos,
           "agent failure does not name AwaitProhibited");
  }

  {  // (c) blocking deref is rejected inside agent actions
    auto gate = detect::make_gate();
    auto f = spawn_future([gate]() -> long long {
      gate->await();
      return 1;
    });
    auto actor = make_agent<long long>(0);
    actor->send([f](long long v) { return v + f.deref(); });
    bool failed = false;
    for (int i = 0; i < 2500 && !failed; ++i) {
      failed = actor->failed();
      std::this_thread::sleep_for(2ms);
    }
    expect(failed, "blocking deref inside an agent action did not fail the agent");
    expect(actor->error().value_or("").find(to_string(ErrorKind::BlockingReadProhibited)) !=
               std::string::npos,
           "agent failure does not name BlockingReadProhibited");
    gate->open();
    f.deref();
  }

  {  // (d) channel operations are rejected in retryable scopes
    auto ch = make_channel<long long>();
    bool txn_raised = false;
    try {
      stm::transaction([&]() -> long long {
        ch->offer(1);
        return 0;
      });
    } catch (const ConcurrencyError& e) {
      txn_raised = (e.kind() == ErrorKind::IrrevocableInRetryScope);
    }
    expect(txn_raised, "channel offer inside a transaction did not raise");

    auto a = make_atom<long long>(0);
    bool swap_raised = false;
    try {
      a->swap([&](long long v) {
        (void)ch->try_take();
        return v;
      });
    } catch (const ConcurrencyError& e) {
      swap_raised = (e.kind() == ErrorKind::IrrevocableInRetryScope);
    }
    expect(swap_raised, "channel try_take inside a swap function did not raise");
  }

  {  // (e) a future spawned by an aborting transaction is cancelled
    auto gate = detect::make_gate();
    Future<long long> f;
    try {
      stm::transaction([&]() -> long long {
        f = spawn_future([gate]() -> long long {
          gate->await();
          return 1;
        });
        throw Failure{"abort"};
      });
    } catch (const Failure&) {
    }
    bool cancelled = false;
    for (int i = 0; i < 2500 && !cancelled; ++i) {
      cancelled = (f.state() == FutureState::Cancelled);
      std::this_thread::sleep_for(2ms);
    }
    expect(cancelled, "the future of an aborted transaction never reached Cancelled");
  }

  {  // (f) nested transactions commit exactly once
    auto r1 = make_ref<long long>(0);
    auto r2 = make_ref<long long>(0);
    auto before = stm::commit_count();
    stm::transaction([&]() -> long long {
      r1->set(1);
      stm::transaction([&]() -> long long {
        r2->set(2);
        return 0;
      });
      return 0;
    });
    expect(stm::commit_count() == before + 1,
           "nested transactions produced " + std::to_string(stm::commit_count() - before) +
               " commit events, wanted 1");
    expect(r1->deref() == 1 && r2->deref() == 2, "nested writes were lost");
  }

  // Unmitigated combinations keep their faithful classification in guarded runs.
  auto report = matrix_run(Mode::Guarded, Selection::All, RunConfig{});
  expect(report.pass, "guarded matrix run flagged failure");
  for (const auto& cell : report.cells) {
    if (cell.property == Property::Safety && cell.outer == ModelId::Atoms) {
      expect(cell.observed_issue, std::string("guarded atoms safety row lost its issue at inner=") +
                                      inner_tag(cell.inner));
    }
    if (cell.property == Property::Liveness && cell.inner == ModelId::Channels) {
      expect(cell.observed_issue,
             std::string("guarded channels liveness column lost its issue at outer=") +
                 outer_tag(cell.outer));
    }
  }

  c.pass = true;
  c.detail =
      "exactly-once effects at retries {0,1,5}; all five prohibitions raise; guarded "
      "matrix passes with the unmitigated cells unchanged";
  return c;
}

Criterion stm_properties() {
  Criterion c{5, false, {}};
  expect_prop(props::stm_serializability(200), "serializability");
  expect_prop(props::stm_counting(), "counting");
  expect_prop(props::stm_contention_terminates(), "contention");
  c.pass = true;
  c.detail = "200 random histories serializable; 3x20 increments exact; contention terminates";
  return c;
}

Criterion model_properties() {
  Criterion c{6, false, {}};
  expect_prop(props::atom_linearizability(), "atom linearizability");
  expect_prop(props::promise_single_assignment(), "promise single-assignment");
  expect_prop(props::channel_exactly_once(), "channel exactly-once");
  expect_prop(props::agent_serial_fifo(), "agent serial/FIFO");
  c.pass = true;
  c.detail = "atom, promise, channel and agent property suites all hold";
  return c;
}

Criterion run_criterion(int num, const std::function<Criterion()>& body) {
  try {
    return body();
  } catch (const Failure& f) {
    return {num, false, f.text};
  } catch (const std::exception& e) {
    return {num, false, std::string("unexpected error: ") + e.what()};
  }
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  results.push_back(
      run_criterion(1, [] { return matrix_reproduction(1, Selection::SafetyOnly); }));
  results.push_back(
      run_criterion(2, [] { return matrix_reproduction(2, Selection::LivenessOnly); }));
  results.push_back(run_criterion(3, named_program_fidelity));
  results.push_back(run_criterion(4, guarded_mitigations));
  results.push_back(run_criterion(5, stm_properties));
  results.push_back(run_criterion(6, model_properties));

  bool all = true;
  for (const auto& r : results) {
    std::printf("criterion %d: %s — %s\n", r.num, r.pass ? "PASS" : "FAIL", r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
