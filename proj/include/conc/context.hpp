#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "conc/errors.hpp"

namespace conc {

// ---------------------------------------------------------------------------
// Runtime mode
// ---------------------------------------------------------------------------

// Faithful reproduces the hazards of naive model composition; Guarded enables
// the mitigations (deferred promise delivery, future cancellation on abort,
// blocking-read and retry-scope prohibitions, reentrant-swap detection).
enum class Mode { Faithful, Guarded };

Mode mode() noexcept;
const char* to_string(Mode m) noexcept;

// Rejected with ModeChangeWhileRunning while a scenario session is active.
void set_mode(Mode m);

// ---------------------------------------------------------------------------
// Dynamic scope stack
// ---------------------------------------------------------------------------

// One entry per dynamic region an execution unit is inside. Each unit owns an
// independent stack whose bottom entry is always TopLevel; units never inherit
// their spawner's stack.
struct ScopeKind {
  enum class Kind : std::uint8_t {
    TopLevel,
    SwapFn,       // body of an atom swap, id = atom id
    AgentAction,  // agent action being executed, id = agent id
    Transaction,  // open transaction, id = txn id
    FutureBody,   // body of a spawned future, id = future id
    GoBlock,      // body of a go block, id = task id
  };

  Kind kind = Kind::TopLevel;
  std::uint64_t id = 0;

  static ScopeKind top_level() { return {Kind::TopLevel, 0}; }
  static ScopeKind swap_fn(std::uint64_t atom_id) { return {Kind::SwapFn, atom_id}; }
  static ScopeKind agent_action(std::uint64_t agent_id) { return {Kind::AgentAction, agent_id}; }
  static ScopeKind transaction(std::uint64_t txn_id) { return {Kind::Transaction, txn_id}; }
  static ScopeKind future_body(std::uint64_t future_id) { return {Kind::FutureBody, future_id}; }
  static ScopeKind go_block(std::uint64_t task_id) { return {Kind::GoBlock, task_id}; }

  friend bool operator==(const ScopeKind& a, const ScopeKind& b) = default;

  std::string describe() const;
};

// Immutable copy of a unit's scope stack plus the global mode, taken at one
// instant. Later scope pushes/pops do not affect an existing snapshot.
struct ContextSnapshot {
  std::vector<ScopeKind> scope_stack;  // bottom (TopLevel) first
  Mode mode = Mode::Faithful;

  bool contains(ScopeKind::Kind kind) const;
  // Innermost entry of the given kind, or nullptr.
  const ScopeKind* innermost(ScopeKind::Kind kind) const;
};

ContextSnapshot current_context();

namespace detail {
void push_scope(const ScopeKind& kind);
void pop_scope();
std::size_t scope_depth();
// Live view of the calling unit's stack; valid only on the owning thread.
const std::vector<ScopeKind>& scope_stack();
}  // namespace detail

class ScopeGuard {
 public:
  explicit ScopeGuard(const ScopeKind& kind) { detail::push_scope(kind); }
  ~ScopeGuard() { detail::pop_scope(); }
  ScopeGuard(const ScopeGuard&) = delete;
  ScopeGuard& operator=(const ScopeGuard&) = delete;
};

// Runs body with `kind` pushed on the calling unit's stack; the stack is
// restored on both normal return and exception.
template <typename F>
auto with_scope(const ScopeKind& kind, F&& body) -> decltype(body()) {
  ScopeGuard guard(kind);
  return std::forward<F>(body)();
}

// ---------------------------------------------------------------------------
// Deferred effects
// ---------------------------------------------------------------------------

// A side effect captured inside a transaction and executed exactly once when
// the transaction commits; discarded when the attempt aborts or retries.
struct DeferredEffect {
  enum class Kind { AgentSend, PromiseDeliver };

  Kind kind = Kind::AgentSend;
  std::uint64_t target_id = 0;  // agent or promise id, for diagnostics
  std::uint64_t origin_txn = 0;
  std::function<void()> fire;
};

// Interface the STM installs on the unit while a transaction is open, so that
// lower layers can queue effects without depending on the STM.
class TransactionFrame {
 public:
  virtual ~TransactionFrame() = default;
  virtual std::uint64_t txn_id() const noexcept = 0;
  virtual void add_deferred(DeferredEffect effect) = 0;
};

// Queues an effect on the innermost open transaction of the calling unit.
// Raises NotInTransaction when no transaction is open.
void defer_until_commit(DeferredEffect effect);

// ---------------------------------------------------------------------------
// Execution units
// ---------------------------------------------------------------------------

// Cooperative cancellation shared by every unit of a scenario session. All
// blocking and retrying primitives poll it so teardown can stop stuck units.
class CancelSource {
 public:
  void cancel() noexcept { flag_.store(true, std::memory_order_seq_cst); }
  bool cancelled() const noexcept { return flag_.load(std::memory_order_seq_cst); }

 private:
  std::atomic<bool> flag_{false};
};

namespace detail {

struct UnitState {
  std::uint64_t id = 0;
  std::vector<ScopeKind> scopes;                // starts as {TopLevel}
  std::shared_ptr<CancelSource> cancel;         // null outside scenario sessions
  TransactionFrame* active_txn = nullptr;       // owned by the STM while open
  std::function<void()> cancel_hook;            // set inside future bodies
  std::vector<std::function<void()>>* held_sends = nullptr;  // set during agent actions
  bool member = false;                          // spawned under a scenario session
  std::mt19937_64 rng{0xC0FFEE};
};

// Thread-local state of the calling unit, created on first use.
UnitState& unit();

std::uint64_t next_object_id();
}  // namespace detail

// Identity of the calling unit (lazily assigned per thread).
std::uint64_t unit_id();

// Throws ScenarioCancelled when the calling unit's scenario was torn down.
void poll_cancel();

// Cancellation point: poll_cancel plus, inside a future body, the check that
// flips a cancel-requested pending future to Cancelled.
void cancellation_point();

}  // namespace conc
