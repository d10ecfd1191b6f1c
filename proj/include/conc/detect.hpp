#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "conc/context.hpp"
#include "conc/errors.hpp"

namespace conc::detect {

using std::chrono::milliseconds;

// ---------------------------------------------------------------------------
// Resources a unit can block on
// ---------------------------------------------------------------------------

struct Resource {
  enum class Kind : std::uint8_t {
    FutureVal,   // resolution of a future; resolver = body unit
    PromiseVal,  // delivery of a promise; resolver unknown
    AgentFlush,  // flush sentinel of an agent; resolver = executor unit
    ChanPut,     // a put awaiting its taker; resolver unknown
    ChanTake,    // a take awaiting its putter; resolver unknown
    Gate,        // orchestration gate
    UnitDone,    // orchestration join on a spawned unit
  };

  Kind kind = Kind::Gate;
  std::uint64_t id = 0;

  friend bool operator==(const Resource& a, const Resource& b) = default;
  std::string describe() const;
};

enum class UnitStatus { Running, Blocked, Dormant, Terminated };

// ---------------------------------------------------------------------------
// Progress clock
// ---------------------------------------------------------------------------

// Bumped on every completed model operation (swap install, action processed,
// commit, delivery, rendezvous, ...). The quiescence probe treats a stretch
// with no bumps and every live unit blocked as a deadlock.
void progress();
std::uint64_t progress_count();

// ---------------------------------------------------------------------------
// Retry watchdog
// ---------------------------------------------------------------------------

enum class RetryKind { SwapRetry, TxnRetry };

// One retry loop (a single swap call or a single outermost transaction).
// Registers itself for the watchdog while alive.
class RetryLoop {
 public:
  RetryLoop(RetryKind kind, std::string label);
  ~RetryLoop();
  RetryLoop(const RetryLoop&) = delete;
  RetryLoop& operator=(const RetryLoop&) = delete;

  void bump();  // one more re-execution of the loop body
  std::uint64_t count() const;

 private:
  std::uint64_t key_;
};

struct WatchdogVerdict {
  bool suspected = false;
  std::string evidence;
};

// LivelockSuspected iff any single live retry loop of the given kind has
// re-executed at least `threshold` times within the current session.
WatchdogVerdict watchdog_check(RetryKind kind, std::uint64_t threshold);

// ---------------------------------------------------------------------------
// Wait-for graph
// ---------------------------------------------------------------------------

// Declares which unit resolves a resource (future body, agent executor).
void register_resolver(const Resource& res, std::uint64_t resolver_unit);
void clear_resolver(const Resource& res);

struct DeadlockVerdict {
  bool detected = false;
  std::string evidence;
};

// Two detectors in one probe:
//  (a) cycle through blocked units and resources with known resolvers;
//  (b) quiescence: at least one live unit, all live units blocked on
//      non-orchestration resources, and no progress for a full window.
// Orchestration waits (gates, unit joins) never contribute to a verdict; a
// pending gate wait vetoes quiescence. Calls must be frequent relative to the
// window; each call updates the progress bookkeeping it relies on.
DeadlockVerdict deadlock_probe(milliseconds window);

// ---------------------------------------------------------------------------
// Blocking seam
// ---------------------------------------------------------------------------

enum class WaitResult { Ready, TimedOut };

// The one instrumented wait every blocking primitive goes through. Registers
// the wait edge and Blocked status while waiting, re-checks `ready` on each
// slice, honours the timeout, polls scenario cancellation, and (when the wait
// is a cancellation point) the future-body cancel hook. `lk` must be locked on
// entry and is locked again on return and on exceptions.
WaitResult blocking_wait(std::unique_lock<std::mutex>& lk, std::condition_variable& cv,
                         const Resource& res, bool orchestration,
                         std::optional<milliseconds> timeout,
                         const std::function<bool()>& ready, bool is_cancellation_point);

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

// One-shot Closed -> Open latch used to force interleavings. Opening is
// idempotent and releases current and future awaiters. Gate waits are tagged
// orchestration and excluded from deadlock verdicts.
class Gate {
 public:
  Gate();
  void open();
  void await();  // no timeout; scenario cancellation still applies
  bool is_open() const;
  std::uint64_t id() const { return id_; }

 private:
  mutable std::mutex m_;
  std::condition_variable cv_;
  bool open_ = false;
  std::uint64_t id_;
};

using GatePtr = std::shared_ptr<Gate>;
GatePtr make_gate();

// ---------------------------------------------------------------------------
// Unit spawning
// ---------------------------------------------------------------------------

// Handle to a spawned execution unit. Joining is an orchestration wait; the
// underlying thread is joined when the last handle is released (after the body
// exited, normally or via cancellation).
class UnitHandle {
 public:
  UnitHandle() = default;
  std::uint64_t id() const;
  bool done() const;
  void join(std::optional<milliseconds> timeout = {});  // Timeout error on expiry

 private:
  friend UnitHandle spawn_unit(const ScopeKind& initial, std::function<void()> body);
  struct Rec;
  std::shared_ptr<Rec> rec_;
};

// Starts a new execution unit with a fresh scope stack ({TopLevel} plus
// `initial` when it is not TopLevel). Units spawned while a session is active
// become scenario members and share the session's cancel source.
UnitHandle spawn_unit(const ScopeKind& initial, std::function<void()> body);

// Marks the calling unit dormant (idle executor parked for work) or back to
// running. Dormant units neither veto nor satisfy the quiescence condition.
void set_dormant(bool dormant);

// Diagnostics: first error that escaped a unit body during the current
// session, if any. Taking it clears it.
void note_stray_error(ErrorKind kind, const std::string& msg);
std::optional<std::pair<ErrorKind, std::string>> take_stray_error();

// ---------------------------------------------------------------------------
// Scenario session
// ---------------------------------------------------------------------------

struct SessionConfig {
  std::uint64_t seed = 42;
  std::uint64_t retry_threshold = 1000;
  milliseconds quiescence_window{500};
};

// Scopes one scenario run: resets detector state, installs the shared cancel
// source, marks the runtime as running (freezing the mode), and on destruction
// cancels and waits out every member unit.
class Session {
 public:
  explicit Session(SessionConfig config);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const { return config_; }
  void cancel() noexcept;
  // True when no member unit is Running or Blocked (Dormant/Terminated only).
  bool settled() const;
  // Waits until settled; false on timeout.
  bool wait_settled(milliseconds timeout) const;

 private:
  SessionConfig config_;
  std::shared_ptr<CancelSource> cancel_;
};

bool session_active();
std::uint64_t session_seed();

}  // namespace conc::detect
