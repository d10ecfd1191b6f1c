#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"

namespace conc {

namespace detail {

template <typename T>
struct AgentCore {
  using Action = std::function<T(const T&)>;

  struct FlushMark {
    std::mutex m;
    std::condition_variable cv;
    bool done = false;
  };
  struct ActionItem {
    Action fn;
  };
  struct FlushItem {
    std::shared_ptr<FlushMark> mark;
  };
  struct StopItem {};
  using Item = std::variant<ActionItem, FlushItem, StopItem>;

  explicit AgentCore(T initial) : id(next_object_id()), value(std::move(initial)) {}

  std::uint64_t id;

  std::mutex vm;
  T value;
  bool failed = false;
  std::string error;

  std::mutex qm;
  std::condition_variable qcv;
  std::deque<Item> queue;
  std::uint64_t processed = 0;

  bool is_failed() {
    std::lock_guard lk(vm);
    return failed;
  }

  void push(Item item) {
    {
      std::lock_guard lk(qm);
      queue.push_back(std::move(item));
    }
    qcv.notify_all();
  }

  // Direct or commit-fired send: refuses a failed agent.
  void enqueue_checked(Action fn) {
    if (is_failed()) {
      raise(ErrorKind::AgentFailed, "send to failed agent#" + std::to_string(id) + ": " + error);
    }
    push(ActionItem{std::move(fn)});
  }

  // Held-send flush: a send captured before the target failed is dropped
  // silently rather than failing the unrelated completing action.
  void enqueue_lenient(Action fn) {
    if (is_failed()) return;
    push(ActionItem{std::move(fn)});
  }
};

}  // namespace detail

// Uncoordinated asynchronous reference: actions queue in send order and run
// one at a time on the agent's own executor unit. Sends made inside an agent
// action are held until the action completes normally; sends made inside a
// transaction are deferred until it commits.
template <typename T>
class Agent {
 public:
  explicit Agent(T initial) : core_(std::make_shared<detail::AgentCore<T>>(std::move(initial))) {
    start_executor();
  }

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  ~Agent() {
    core_->push(typename detail::AgentCore<T>::StopItem{});
    // exec_ joins the executor unit on destruction
  }

  std::uint64_t id() const { return core_->id; }

  // Current (pre-action) state; never blocks, works on a failed agent too.
  T deref() const {
    std::lock_guard lk(core_->vm);
    return core_->value;
  }

  bool failed() const { return core_->is_failed(); }

  std::optional<std::string> error() const {
    std::lock_guard lk(core_->vm);
    if (!core_->failed) return std::nullopt;
    return core_->error;
  }

  // Queues fn to run against the agent's state. Dispatch depends on the
  // caller's innermost scope: transactions defer the send to commit, agent
  // actions hold it until the action completes normally, anywhere else it
  // enqueues immediately.
  template <typename F>
  void send(F&& fn) {
    auto action = typename detail::AgentCore<T>::Action(std::forward<F>(fn));
    auto core = core_;
    auto& u = detail::unit();
    const auto& scopes = detail::scope_stack();
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      if (it->kind == ScopeKind::Kind::Transaction) {
        defer_until_commit(DeferredEffect{
            DeferredEffect::Kind::AgentSend, core->id, 0,
            [core, action = std::move(action)]() mutable { core->enqueue_checked(std::move(action)); }});
        return;
      }
      if (it->kind == ScopeKind::Kind::AgentAction) {
        u.held_sends->push_back(
            [core, action = std::move(action)]() mutable { core->enqueue_lenient(std::move(action)); });
        return;
      }
    }
    core->enqueue_checked(std::move(action));
  }

  // Blocks until every action queued before this call has run. Prohibited
  // inside agent actions and transactions (it would block the executor or be
  // re-run by retries); Guarded mode also prohibits it inside swap functions.
  void await() { await_impl(std::nullopt); }

  // As await(), raising Timeout when the queue does not drain in time.
  void await_for(std::chrono::milliseconds timeout) { await_impl(timeout); }

  // Clears the failed flag, resets state, and drops any queued actions.
  void restart(T new_value) {
    {
      std::lock_guard lk(core_->qm);
      std::deque<typename detail::AgentCore<T>::Item> keep;
      for (auto& item : core_->queue) {
        if (!std::holds_alternative<typename detail::AgentCore<T>::ActionItem>(item)) {
          keep.push_back(std::move(item));
        }
      }
      core_->queue.swap(keep);
    }
    std::lock_guard lk(core_->vm);
    core_->failed = false;
    core_->error.clear();
    core_->value = std::move(new_value);
  }

  std::uint64_t processed_count() const {
    std::lock_guard lk(core_->qm);
    return core_->processed;
  }

  std::size_t queue_len() const {
    std::lock_guard lk(core_->qm);
    return core_->queue.size();
  }

  std::uint64_t executor_unit() const { return exec_->id(); }

 private:
  using Core = detail::AgentCore<T>;

  void await_impl(std::optional<std::chrono::milliseconds> timeout) {
    const auto& scopes = detail::scope_stack();
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      if (it->kind == ScopeKind::Kind::AgentAction || it->kind == ScopeKind::Kind::Transaction) {
        raise(ErrorKind::AwaitProhibited,
              "await on agent#" + std::to_string(core_->id) + " inside " + it->describe());
      }
      if (mode() == Mode::Guarded && it->kind == ScopeKind::Kind::SwapFn) {
        raise(ErrorKind::AwaitProhibited,
              "await on agent#" + std::to_string(core_->id) + " inside " + it->describe());
      }
    }
    auto mark = std::make_shared<typename Core::FlushMark>();
    core_->push(typename Core::FlushItem{mark});
    const detect::Resource res{detect::Resource::Kind::AgentFlush, core_->id};
    std::unique_lock lk(mark->m);
    const auto outcome =
        detect::blocking_wait(lk, mark->cv, res, /*orchestration=*/false, timeout,
                              [&] { return mark->done; }, /*is_cancellation_point=*/true);
    if (outcome == detect::WaitResult::TimedOut) {
      lk.unlock();
      raise(ErrorKind::Timeout, "await on agent#" + std::to_string(core_->id) + " timed out");
    }
    lk.unlock();
    if (core_->is_failed()) {
      raise(ErrorKind::AgentFailed, "agent#" + std::to_string(core_->id) + " failed: " +
                                        error().value_or("unknown error"));
    }
  }

  void start_executor() {
    auto core = core_;
    exec_ = std::make_unique<detect::UnitHandle>(
        detect::spawn_unit(ScopeKind::top_level(), [core] { executor_loop(core); }));
    detect::register_resolver({detect::Resource::Kind::AgentFlush, core_->id}, exec_->id());
  }

  static void executor_loop(std::shared_ptr<Core> core) {
    using namespace std::chrono_literals;
    for (;;) {
      typename Core::Item item;
      {
        std::unique_lock lk(core->qm);
        if (core->queue.empty()) {
          detect::set_dormant(true);
          while (core->queue.empty()) {
            core->qcv.wait_for(lk, 2ms);
            if (core->queue.empty()) poll_cancel();
          }
          detect::set_dormant(false);
        }
        item = std::move(core->queue.front());
        core->queue.pop_front();
      }
      if (std::holds_alternative<typename Core::StopItem>(item)) return;
      if (auto* flush = std::get_if<typename Core::FlushItem>(&item)) {
        {
          std::lock_guard lk(flush->mark->m);
          flush->mark->done = true;
        }
        flush->mark->cv.notify_all();
        continue;
      }
      run_action(*core, std::move(std::get<typename Core::ActionItem>(item).fn));
    }
  }

  static void run_action(Core& core, typename Core::Action fn) {
    if (core.is_failed()) return;  // actions queued behind a failure are dropped
    auto& u = detail::unit();
    std::vector<std::function<void()>> held;
    u.held_sends = &held;
    T before = [&core] {
      std::lock_guard lk(core.vm);
      return core.value;
    }();
    try {
      T after = with_scope(ScopeKind::agent_action(core.id),
                           [&] { return fn(std::as_const(before)); });
      {
        std::lock_guard lk(core.vm);
        core.value = std::move(after);
      }
      u.held_sends = nullptr;
      {
        std::lock_guard lk(core.qm);
        ++core.processed;
      }
      detect::progress();
      for (auto& send : held) send();  // held sends escape only on normal completion
    } catch (const ScenarioCancelled&) {
      u.held_sends = nullptr;
      throw;
    } catch (const std::exception& e) {
      u.held_sends = nullptr;
      std::lock_guard lk(core.vm);
      core.failed = true;
      core.error = e.what();
    } catch (...) {
      u.held_sends = nullptr;
      std::lock_guard lk(core.vm);
      core.failed = true;
      core.error = "unknown error in agent action";
    }
  }

  std::shared_ptr<Core> core_;
  std::unique_ptr<detect::UnitHandle> exec_;
};

template <typename T>
using AgentPtr = std::shared_ptr<Agent<T>>;

template <typename T>
AgentPtr<T> make_agent(T initial) {
  return std::make_shared<Agent<T>>(std::move(initial));
}

}  // namespace conc
