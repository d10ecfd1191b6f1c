#include "conc/detect.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>
#include <unordered_map>

namespace conc::detail {
// Provided by context.cpp; freezes/unfreezes the mode flag.
void set_scenario_running(bool running);
bool scenario_running();
}  // namespace conc::detail

namespace conc::detect {

namespace {

constexpr auto kWaitSlice = std::chrono::milliseconds(2);

std::atomic<std::uint64_t> g_progress{0};

struct LoopRec {
  RetryKind kind;
  std::string label;
  std::uint64_t unit = 0;
  std::atomic<std::uint64_t> count{0};
};

struct UnitRow {
  UnitStatus status = UnitStatus::Running;
  Resource blocked_on;
  bool orch_wait = false;
  bool member = false;
  std::string label;
};

struct StrayError {
  ErrorKind kind = ErrorKind::Internal;
  std::string message;
};

struct Registry {
  std::mutex m;
  std::map<std::uint64_t, UnitRow> units;
  std::map<std::pair<std::uint8_t, std::uint64_t>, std::uint64_t> resolvers;
  std::map<std::uint64_t, std::shared_ptr<LoopRec>> loops;
  std::uint64_t next_loop_key = 1;

  bool session_active = false;
  SessionConfig session_config;
  std::shared_ptr<CancelSource> session_cancel;
  std::uint64_t quiet_progress = 0;
  std::chrono::steady_clock::time_point quiet_since{};
  std::optional<StrayError> stray;
};

Registry& registry() {
  static Registry reg;
  return reg;
}

std::pair<std::uint8_t, std::uint64_t> res_key(const Resource& r) {
  return {static_cast<std::uint8_t>(r.kind), r.id};
}

UnitRow& row_for_current_unit_locked(Registry& reg) {
  auto& u = conc::detail::unit();
  auto it = reg.units.find(u.id);
  if (it == reg.units.end()) {
    it = reg.units.emplace(u.id, UnitRow{UnitStatus::Running, {}, false, u.member, "ambient"}).first;
  }
  return it->second;
}

}  // namespace

std::string Resource::describe() const {
  std::string name;
  switch (kind) {
    case Kind::FutureVal: name = "future"; break;
    case Kind::PromiseVal: name = "promise"; break;
    case Kind::AgentFlush: name = "agent-flush"; break;
    case Kind::ChanPut: name = "chan-put"; break;
    case Kind::ChanTake: name = "chan-take"; break;
    case Kind::Gate: name = "gate"; break;
    case Kind::UnitDone: name = "unit-done"; break;
  }
  return name + "#" + std::to_string(id);
}

void progress() { g_progress.fetch_add(1, std::memory_order_seq_cst); }

std::uint64_t progress_count() { return g_progress.load(std::memory_order_seq_cst); }

// ---------------------------------------------------------------------------
// Watchdog
// ---------------------------------------------------------------------------

RetryLoop::RetryLoop(RetryKind kind, std::string label) {
  auto rec = std::make_shared<LoopRec>();
  rec->kind = kind;
  rec->label = std::move(label);
  rec->unit = unit_id();
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  key_ = reg.next_loop_key++;
  reg.loops.emplace(key_, std::move(rec));
}

RetryLoop::~RetryLoop() {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  reg.loops.erase(key_);
}

void RetryLoop::bump() {
  auto& reg = registry();
  std::shared_ptr<LoopRec> rec;
  {
    std::lock_guard lk(reg.m);
    auto it = reg.loops.find(key_);
    if (it != reg.loops.end()) rec = it->second;
  }
  if (rec) rec->count.fetch_add(1, std::memory_order_relaxed);
}

std::uint64_t RetryLoop::count() const {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  auto it = reg.loops.find(key_);
  return it == reg.loops.end() ? 0 : it->second->count.load(std::memory_order_relaxed);
}

WatchdogVerdict watchdog_check(RetryKind kind, std::uint64_t threshold) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  for (const auto& [key, rec] : reg.loops) {
    if (rec->kind != kind) continue;
    auto n = rec->count.load(std::memory_order_relaxed);
    if (n >= threshold) {
      std::ostringstream ev;
      ev << rec->label << " on unit#" << rec->unit << " re-executed " << n
         << " times (threshold " << threshold << ")";
      return {true, ev.str()};
    }
  }
  return {false, {}};
}

// ---------------------------------------------------------------------------
// Wait-for graph
// ---------------------------------------------------------------------------

void register_resolver(const Resource& res, std::uint64_t resolver_unit) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  reg.resolvers[res_key(res)] = resolver_unit;
}

void clear_resolver(const Resource& res) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  reg.resolvers.erase(res_key(res));
}

DeadlockVerdict deadlock_probe(milliseconds window) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  if (!reg.session_active) return {};

  // (a) Cycle detection: each blocked member unit has one outgoing edge to the
  // resolver of its resource, when that resolver is known.
  std::unordered_map<std::uint64_t, std::uint64_t> next;
  for (const auto& [id, row] : reg.units) {
    if (!row.member || row.status != UnitStatus::Blocked || row.orch_wait) continue;
    auto it = reg.resolvers.find(res_key(row.blocked_on));
    if (it != reg.resolvers.end()) next[id] = it->second;
  }
  std::unordered_map<std::uint64_t, int> color;  // 0 new, 1 on path, 2 done
  for (const auto& [start, ignored] : next) {
    if (color[start] != 0) continue;
    std::vector<std::uint64_t> path;
    std::uint64_t cur = start;
    while (true) {
      color[cur] = 1;
      path.push_back(cur);
      auto it = next.find(cur);
      if (it == next.end()) break;
      std::uint64_t to = it->second;
      if (color[to] == 1) {
        std::ostringstream ev;
        ev << "wait cycle: ";
        auto first = std::find(path.begin(), path.end(), to);
        for (auto p = first; p != path.end(); ++p) {
          const auto& row = reg.units[*p];
          ev << "unit#" << *p << " waits on " << row.blocked_on.describe() << " -> ";
        }
        ev << "unit#" << to;
        return {true, ev.str()};
      }
      if (color[to] == 2) break;
      cur = to;
    }
    for (auto p : path) color[p] = 2;
  }

  // (b) Quiescence: no running member, no pending orchestration wait, at least
  // one unit blocked on a real resource, and a stalled progress clock.
  bool any_running = false, any_orch = false;
  std::vector<std::pair<std::uint64_t, const UnitRow*>> blocked;
  for (const auto& [id, row] : reg.units) {
    if (!row.member) continue;
    switch (row.status) {
      case UnitStatus::Running: any_running = true; break;
      case UnitStatus::Blocked:
        if (row.orch_wait) any_orch = true;
        else blocked.emplace_back(id, &row);
        break;
      case UnitStatus::Dormant:
      case UnitStatus::Terminated: break;
    }
  }

  auto now = std::chrono::steady_clock::now();
  auto current = g_progress.load(std::memory_order_seq_cst);
  if (current != reg.quiet_progress) {
    reg.quiet_progress = current;
    reg.quiet_since = now;
    return {};
  }
  if (any_running || any_orch || blocked.empty()) return {};
  if (now - reg.quiet_since < window) return {};

  std::ostringstream ev;
  ev << "quiescent for " << window.count() << "ms; blocked units:";
  for (auto& [id, row] : blocked) {
    ev << " unit#" << id << "(" << row->label << ") on " << row->blocked_on.describe() << ";";
  }
  return {true, ev.str()};
}

// ---------------------------------------------------------------------------
// Blocking seam
// ---------------------------------------------------------------------------

namespace {

// RAII Blocked status + wait edge for the calling unit.
class BlockedMark {
 public:
  BlockedMark(const Resource& res, bool orch) {
    auto& reg = registry();
    std::lock_guard lk(reg.m);
    auto& row = row_for_current_unit_locked(reg);
    prev_ = row.status;
    row.status = UnitStatus::Blocked;
    row.blocked_on = res;
    row.orch_wait = orch;
  }
  ~BlockedMark() {
    auto& reg = registry();
    std::lock_guard lk(reg.m);
    auto& row = row_for_current_unit_locked(reg);
    row.status = prev_ == UnitStatus::Dormant ? UnitStatus::Running : prev_;
    row.orch_wait = false;
  }

 private:
  UnitStatus prev_ = UnitStatus::Running;
};

}  // namespace

WaitResult blocking_wait(std::unique_lock<std::mutex>& lk, std::condition_variable& cv,
                         const Resource& res, bool orchestration,
                         std::optional<milliseconds> timeout,
                         const std::function<bool()>& ready, bool is_cancellation_point) {
  if (ready()) return WaitResult::Ready;
  auto& u = conc::detail::unit();
  if (u.cancel && u.cancel->cancelled()) throw ScenarioCancelled{};
  if (is_cancellation_point && u.cancel_hook) u.cancel_hook();

  BlockedMark mark(res, orchestration);
  std::optional<std::chrono::steady_clock::time_point> deadline;
  if (timeout) deadline = std::chrono::steady_clock::now() + *timeout;

  while (true) {
    cv.wait_for(lk, kWaitSlice);
    if (ready()) return WaitResult::Ready;
    if (u.cancel && u.cancel->cancelled()) throw ScenarioCancelled{};
    if (is_cancellation_point && u.cancel_hook) u.cancel_hook();
    if (deadline && std::chrono::steady_clock::now() >= *deadline) return WaitResult::TimedOut;
  }
}

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

Gate::Gate() : id_(conc::detail::next_object_id()) {}

void Gate::open() {
  {
    std::lock_guard lk(m_);
    open_ = true;
  }
  cv_.notify_all();
}

void Gate::await() {
  std::unique_lock lk(m_);
  // A cancellation point: a cancelled future body must not stay parked on a
  // gate that will never open.
  blocking_wait(lk, cv_, Resource{Resource::Kind::Gate, id_}, /*orchestration=*/true,
                std::nullopt, [this] { return open_; }, /*is_cancellation_point=*/true);
}

bool Gate::is_open() const {
  std::lock_guard lk(m_);
  return open_;
}

GatePtr make_gate() { return std::make_shared<Gate>(); }

// ---------------------------------------------------------------------------
// Unit spawning
// ---------------------------------------------------------------------------

struct UnitHandle::Rec {
  std::mutex m;
  std::condition_variable cv;
  std::uint64_t id = 0;
  bool started = false;
  bool done = false;
  std::thread thr;

  ~Rec() {
    if (!thr.joinable()) return;
    // The unit body holds a ref too; when it drops the last one the record
    // is destroyed on the unit's own thread, which must not join itself.
    if (thr.get_id() == std::this_thread::get_id()) {
      thr.detach();
    } else {
      thr.join();
    }
  }
};

std::uint64_t UnitHandle::id() const {
  if (!rec_) return 0;
  std::unique_lock lk(rec_->m);
  rec_->cv.wait(lk, [&] { return rec_->started; });
  return rec_->id;
}

bool UnitHandle::done() const {
  if (!rec_) return true;
  std::lock_guard lk(rec_->m);
  return rec_->done;
}

void UnitHandle::join(std::optional<milliseconds> timeout) {
  if (!rec_) return;
  const auto uid = id();
  std::unique_lock lk(rec_->m);
  auto res = blocking_wait(lk, rec_->cv, Resource{Resource::Kind::UnitDone, uid},
                           /*orchestration=*/true, timeout, [&] { return rec_->done; },
                           /*is_cancellation_point=*/false);
  if (res == WaitResult::TimedOut) raise(ErrorKind::Timeout, "unit join timed out");
}

void note_stray_error(ErrorKind kind, const std::string& msg) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  if (reg.session_active && !reg.stray) reg.stray = StrayError{kind, msg};
}

std::optional<std::pair<ErrorKind, std::string>> take_stray_error() {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  if (!reg.stray) return std::nullopt;
  auto out = std::make_pair(reg.stray->kind, reg.stray->message);
  reg.stray.reset();
  return out;
}

UnitHandle spawn_unit(const ScopeKind& initial, std::function<void()> body) {
  auto rec = std::make_shared<UnitHandle::Rec>();
  bool member;
  std::shared_ptr<CancelSource> cancel;
  std::uint64_t seed;
  {
    auto& reg = registry();
    std::lock_guard lk(reg.m);
    member = reg.session_active;
    cancel = reg.session_cancel;
    seed = reg.session_config.seed;
  }

  rec->thr = std::thread([rec, initial, body = std::move(body), member, cancel, seed] {
    auto& u = conc::detail::unit();
    u.member = member;
    u.cancel = cancel;
    u.rng.seed(seed * 0x9E3779B97F4A7C15ULL + u.id);
    {
      auto& reg = registry();
      std::lock_guard lk(reg.m);
      reg.units[u.id] = UnitRow{UnitStatus::Running, {}, false, member, initial.describe()};
    }
    {
      std::lock_guard lk(rec->m);
      rec->id = u.id;
      rec->started = true;
    }
    rec->cv.notify_all();

    try {
      if (initial.kind != ScopeKind::Kind::TopLevel) {
        with_scope(initial, [&] { body(); });
      } else {
        body();
      }
    } catch (const ScenarioCancelled&) {
      // session teardown
    } catch (const ConcurrencyError& e) {
      note_stray_error(e.kind(), e.what());
    } catch (const std::exception& e) {
      note_stray_error(ErrorKind::Internal, e.what());
    } catch (...) {
      note_stray_error(ErrorKind::Internal, "unknown exception escaped a unit");
    }

    {
      auto& reg = registry();
      std::lock_guard lk(reg.m);
      auto it = reg.units.find(u.id);
      if (it != reg.units.end()) it->second.status = UnitStatus::Terminated;
    }
    {
      std::lock_guard lk(rec->m);
      rec->done = true;
    }
    rec->cv.notify_all();
  });

  UnitHandle handle;
  handle.rec_ = rec;
  handle.id();  // wait for registration so callers can attach resolvers
  return handle;
}

void set_dormant(bool dormant) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  auto& row = row_for_current_unit_locked(reg);
  if (dormant && row.status == UnitStatus::Running) row.status = UnitStatus::Dormant;
  if (!dormant && row.status == UnitStatus::Dormant) row.status = UnitStatus::Running;
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(SessionConfig config) : config_(config) {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  assert(!reg.session_active && "one scenario session at a time");
  // Drop rows of previous sessions and of threads long gone.
  for (auto it = reg.units.begin(); it != reg.units.end();) {
    if (it->second.member || it->second.status == UnitStatus::Terminated) {
      it = reg.units.erase(it);
    } else {
      ++it;
    }
  }
  reg.resolvers.clear();
  reg.loops.clear();
  reg.stray.reset();
  cancel_ = std::make_shared<CancelSource>();
  reg.session_active = true;
  reg.session_config = config_;
  reg.session_cancel = cancel_;
  reg.quiet_progress = g_progress.load();
  reg.quiet_since = std::chrono::steady_clock::now();
  conc::detail::set_scenario_running(true);
}

Session::~Session() {
  cancel();
  wait_settled(milliseconds(5000));
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  reg.session_active = false;
  reg.session_cancel.reset();
  conc::detail::set_scenario_running(false);
}

void Session::cancel() noexcept { cancel_->cancel(); }

bool Session::settled() const {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  for (const auto& [id, row] : reg.units) {
    if (!row.member) continue;
    if (row.status == UnitStatus::Running || row.status == UnitStatus::Blocked) return false;
  }
  return true;
}

bool Session::wait_settled(milliseconds timeout) const {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!settled()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(kWaitSlice);
  }
  return true;
}

bool session_active() {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  return reg.session_active;
}

std::uint64_t session_seed() {
  auto& reg = registry();
  std::lock_guard lk(reg.m);
  return reg.session_config.seed;
}

}  // namespace conc::detect
