#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "conc/stm.hpp"

namespace conc {

enum class FutureState { Pending, Resolved, Failed, Cancelled };

inline const char* to_string(FutureState s) {
  switch (s) {
    case FutureState::Pending: return "pending";
    case FutureState::Resolved: return "resolved";
    case FutureState::Failed: return "failed";
    case FutureState::Cancelled: return "cancelled";
  }
  return "?";
}

namespace detail {

template <typename T>
struct FutureCore {
  explicit FutureCore(detect::Resource res) : id(res.id), resource(res) {}

  std::uint64_t id;
  detect::Resource resource;
  std::mutex m;
  std::condition_variable cv;
  FutureState state = FutureState::Pending;
  std::optional<T> value;
  std::string error;
  std::shared_ptr<CancelSource> cancel = std::make_shared<CancelSource>();

  bool resolve(T v) {
    {
      std::lock_guard lk(m);
      if (state != FutureState::Pending) return false;
      value = std::move(v);
      state = FutureState::Resolved;
    }
    detect::progress();
    cv.notify_all();
    return true;
  }

  void finish(FutureState terminal, std::string msg) {
    {
      std::lock_guard lk(m);
      if (state != FutureState::Pending) return;
      state = terminal;
      error = std::move(msg);
    }
    detect::progress();
    cv.notify_all();
  }

  // Extracts the settled value or raises; call with state != Pending.
  T take(std::unique_lock<std::mutex>& lk) {
    switch (state) {
      case FutureState::Resolved: return *value;
      case FutureState::Failed: {
        auto msg = error;
        lk.unlock();
        raise(ErrorKind::FutureFailed, msg);
      }
      case FutureState::Cancelled:
        lk.unlock();
        raise(ErrorKind::FutureCancelled, resource.describe() + " was cancelled");
      case FutureState::Pending: break;
    }
    raise(ErrorKind::Internal, "take on pending future");
  }
};

inline void check_blocking_read_allowed(const detect::Resource& res) {
  if (mode() != Mode::Guarded) return;
  for (const auto& scope : detail::scope_stack()) {
    if (scope.kind == ScopeKind::Kind::AgentAction) {
      raise(ErrorKind::BlockingReadProhibited,
            "blocking read of " + res.describe() + " inside " + scope.describe());
    }
  }
}

}  // namespace detail

// Read side of an asynchronous value. Copies share the same underlying state.
template <typename T>
class Future {
 public:
  Future() = default;
  explicit Future(std::shared_ptr<detail::FutureCore<T>> core) : core_(std::move(core)) {}

  std::uint64_t id() const { return core_->id; }

  FutureState state() const {
    std::lock_guard lk(core_->m);
    return core_->state;
  }

  // Blocks until the value settles. A cancellation point for the calling unit.
  // Guarded mode refuses to block inside an agent action.
  T deref() const { return deref_impl(std::nullopt); }

  // As deref(), but raises Timeout if the value does not settle in time.
  T deref_for(std::chrono::milliseconds timeout) const { return deref_impl(timeout); }

  // Non-blocking: the value if resolved, nullopt while pending; raises on a
  // failed or cancelled future.
  std::optional<T> poll() const {
    std::unique_lock lk(core_->m);
    if (core_->state == FutureState::Pending) return std::nullopt;
    return core_->take(lk);
  }

  // Requests cancellation of the producing unit. Honored only when that unit
  // reaches a cancellation point; a body that settles first wins.
  void cancel() const {
    core_->cancel->cancel();
    core_->cv.notify_all();
  }

  bool valid() const { return core_ != nullptr; }

 private:
  T deref_impl(std::optional<std::chrono::milliseconds> timeout) const {
    detail::check_blocking_read_allowed(core_->resource);
    std::unique_lock lk(core_->m);
    const auto outcome = detect::blocking_wait(
        lk, core_->cv, core_->resource, /*orchestration=*/false, timeout,
        [&] { return core_->state != FutureState::Pending; },
        /*is_cancellation_point=*/true);
    if (outcome == detect::WaitResult::TimedOut) {
      lk.unlock();
      raise(ErrorKind::Timeout, "timed out waiting for " + core_->resource.describe());
    }
    return core_->take(lk);
  }

  std::shared_ptr<detail::FutureCore<T>> core_;
};

// Write side of a single-assignment value with no producing unit of its own.
template <typename T>
class Promise {
 public:
  Promise()
      : core_(std::make_shared<detail::FutureCore<T>>(
            detect::Resource{detect::Resource::Kind::PromiseVal, detail::next_object_id()})) {}

  std::uint64_t id() const { return core_->id; }
  Future<T> future() const { return Future<T>(core_); }

  // First delivery wins and returns true; later deliveries return false.
  // Inside a Guarded transaction the delivery is deferred to commit (and
  // discarded with the attempt on retry/abort); Faithful delivers immediately.
  bool deliver(T v) const {
    if (mode() == Mode::Guarded && detail::unit().active_txn != nullptr) {
      auto core = core_;
      defer_until_commit(DeferredEffect{
          DeferredEffect::Kind::PromiseDeliver, core_->id, 0,
          [core, v = std::move(v)]() mutable { core->resolve(std::move(v)); }});
      return true;  // provisional: resolved for real iff the transaction commits
    }
    return core_->resolve(std::move(v));
  }

 private:
  std::shared_ptr<detail::FutureCore<T>> core_;
};

// Runs body on a fresh unit and returns the future of its result. The body
// unit starts with a clean scope stack under a future-body scope. In Guarded
// mode a future spawned inside a transaction attempt is cancelled if that
// attempt retries or aborts.
template <typename F>
auto spawn_future(F&& body) -> Future<std::invoke_result_t<F>> {
  using T = std::invoke_result_t<F>;
  const detect::Resource res{detect::Resource::Kind::FutureVal, detail::next_object_id()};
  auto core = std::make_shared<detail::FutureCore<T>>(res);
  auto fn = std::function<T()>(std::forward<F>(body));

  auto handle = std::make_shared<detect::UnitHandle>(detect::spawn_unit(
      ScopeKind::future_body(res.id), [core, fn = std::move(fn)] {
        auto& u = detail::unit();
        auto cancel = core->cancel;
        u.cancel_hook = [cancel] {
          if (cancel->cancelled()) throw FutureCancelSignal{};
        };
        try {
          u.cancel_hook();  // cancelled before the body ever ran
          core->resolve(fn());
        } catch (const FutureCancelSignal&) {
          core->finish(FutureState::Cancelled, "cancelled");
        } catch (const ScenarioCancelled&) {
          core->finish(FutureState::Cancelled, "scenario teardown");
          u.cancel_hook = nullptr;
          throw;
        } catch (const ConcurrencyError& e) {
          core->finish(FutureState::Failed, e.what());
        } catch (const std::exception& e) {
          core->finish(FutureState::Failed, e.what());
        } catch (...) {
          core->finish(FutureState::Failed, "unknown error in future body");
        }
        u.cancel_hook = nullptr;
      }));
  detect::register_resolver(res, handle->id());

  if (mode() == Mode::Guarded && stm::in_transaction()) {
    stm::register_abort_hook([core] {
      core->cancel->cancel();
      core->cv.notify_all();
    });
  }

  // The unit handle (and so the thread join) rides along with the shared
  // state: dropping the last Future copy joins the body unit.
  struct Owned {
    std::shared_ptr<detail::FutureCore<T>> core;
    std::shared_ptr<detect::UnitHandle> handle;
  };
  auto owned = std::make_shared<Owned>(Owned{core, std::move(handle)});
  return Future<T>(std::shared_ptr<detail::FutureCore<T>>(owned, owned->core.get()));
}

}  // namespace conc
