#include "conc/context.hpp"

#include <algorithm>
#include <cassert>

namespace conc {

namespace {
std::atomic<Mode> g_mode{Mode::Faithful};
std::atomic<bool> g_scenario_running{false};
std::atomic<std::uint64_t> g_next_unit_id{1};
std::atomic<std::uint64_t> g_next_object_id{1};
}  // namespace

Mode mode() noexcept { return g_mode.load(std::memory_order_seq_cst); }

const char* to_string(Mode m) noexcept {
  return m == Mode::Faithful ? "faithful" : "guarded";
}

void set_mode(Mode m) {
  if (g_scenario_running.load(std::memory_order_seq_cst)) {
    raise(ErrorKind::ModeChangeWhileRunning, "mode is fixed while a scenario runs");
  }
  g_mode.store(m, std::memory_order_seq_cst);
}

namespace detail {

void set_scenario_running(bool running) {  // called by the detector session
  g_scenario_running.store(running, std::memory_order_seq_cst);
}

bool scenario_running() { return g_scenario_running.load(std::memory_order_seq_cst); }

UnitState& unit() {
  thread_local UnitState state = [] {
    UnitState s;
    s.id = g_next_unit_id.fetch_add(1, std::memory_order_relaxed);
    s.scopes.push_back(ScopeKind::top_level());
    s.rng.seed(0x9E3779B97F4A7C15ULL ^ s.id);
    return s;
  }();
  return state;
}

std::uint64_t next_object_id() {
  return g_next_object_id.fetch_add(1, std::memory_order_relaxed);
}

void push_scope(const ScopeKind& kind) { unit().scopes.push_back(kind); }

void pop_scope() {
  auto& scopes = unit().scopes;
  assert(scopes.size() > 1 && "TopLevel scope is never popped");
  scopes.pop_back();
}

std::size_t scope_depth() { return unit().scopes.size(); }

const std::vector<ScopeKind>& scope_stack() { return unit().scopes; }

}  // namespace detail

std::string ScopeKind::describe() const {
  switch (kind) {
    case Kind::TopLevel: return "top-level";
    case Kind::SwapFn: return "swap-fn(atom#" + std::to_string(id) + ")";
    case Kind::AgentAction: return "agent-action(agent#" + std::to_string(id) + ")";
    case Kind::Transaction: return "transaction(txn#" + std::to_string(id) + ")";
    case Kind::FutureBody: return "future-body(future#" + std::to_string(id) + ")";
    case Kind::GoBlock: return "go-block(task#" + std::to_string(id) + ")";
  }
  return "unknown";
}

bool ContextSnapshot::contains(ScopeKind::Kind kind) const {
  return std::any_of(scope_stack.begin(), scope_stack.end(),
                     [kind](const ScopeKind& s) { return s.kind == kind; });
}

const ScopeKind* ContextSnapshot::innermost(ScopeKind::Kind kind) const {
  for (auto it = scope_stack.rbegin(); it != scope_stack.rend(); ++it) {
    if (it->kind == kind) return &*it;
  }
  return nullptr;
}

ContextSnapshot current_context() {
  return ContextSnapshot{detail::unit().scopes, mode()};
}

void defer_until_commit(DeferredEffect effect) {
  auto* txn = detail::unit().active_txn;
  if (txn == nullptr) {
    raise(ErrorKind::NotInTransaction, "defer_until_commit outside a transaction");
  }
  effect.origin_txn = txn->txn_id();
  txn->add_deferred(std::move(effect));
}

std::uint64_t unit_id() { return detail::unit().id; }

void poll_cancel() {
  auto& u = detail::unit();
  if (u.cancel && u.cancel->cancelled()) throw ScenarioCancelled{};
}

void cancellation_point() {
  poll_cancel();
  auto& u = detail::unit();
  if (u.cancel_hook) u.cancel_hook();
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotInTransaction: return "NotInTransaction";
    case ErrorKind::ModeChangeWhileRunning: return "ModeChangeWhileRunning";
    case ErrorKind::AgentFailed: return "AgentFailed";
    case ErrorKind::AwaitProhibited: return "AwaitProhibited";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::ReentrantSwap: return "ReentrantSwap";
    case ErrorKind::TxnRetryLimit: return "TxnRetryLimit";
    case ErrorKind::FutureFailed: return "FutureFailed";
    case ErrorKind::FutureCancelled: return "FutureCancelled";
    case ErrorKind::BlockingReadProhibited: return "BlockingReadProhibited";
    case ErrorKind::IrrevocableInRetryScope: return "IrrevocableInRetryScope";
    case ErrorKind::ChannelClosed: return "ChannelClosed";
    case ErrorKind::UnknownScenario: return "UnknownScenario";
    case ErrorKind::ScenarioTimeout: return "ScenarioTimeout";
    case ErrorKind::SinkUnwritable: return "SinkUnwritable";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace conc
