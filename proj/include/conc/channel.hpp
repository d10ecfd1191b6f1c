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
#include <type_traits>
#include <utility>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"

namespace conc {

namespace detail {

// Guarded mode: channel operations commit to a communication that retries
// cannot undo, so they are refused inside swap functions and transactions.
inline void check_revocable_scope(std::uint64_t chan_id) {
  if (mode() != Mode::Guarded) return;
  const auto& scopes = scope_stack();
  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
    if (it->kind == ScopeKind::Kind::Transaction || it->kind == ScopeKind::Kind::SwapFn) {
      raise(ErrorKind::IrrevocableInRetryScope,
            "channel op on chan#" + std::to_string(chan_id) + " inside " + it->describe());
    }
  }
}

}  // namespace detail

// Unbuffered rendezvous channel: a put completes only when a take consumes the
// value, and vice versa. Waiters match in FIFO order.
template <typename T>
class Channel {
 public:
  Channel() : id_(detail::next_object_id()) {}
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  std::uint64_t id() const { return id_; }

  // Blocks until a taker consumes v. A cancellation point.
  void put(T v) { put_impl(std::move(v), std::nullopt); }

  // As put(), but gives up (and withdraws) after the timeout. True on handoff.
  bool put_for(T v, std::chrono::milliseconds timeout) {
    return put_impl(std::move(v), timeout);
  }

  // Non-blocking put: true iff a taker was already waiting.
  bool offer(T v) {
    detail::check_revocable_scope(id_);
    std::unique_lock lk(m_);
    if (closed_) raise_closed(lk);
    return hand_to_taker(v);
  }

  // Blocks until a putter provides a value. A cancellation point.
  T take() {
    auto v = take_impl(std::nullopt);
    return std::move(*v);
  }

  // As take(), but returns nullopt after the timeout.
  std::optional<T> take_for(std::chrono::milliseconds timeout) { return take_impl(timeout); }

  // Non-blocking take: a value iff a putter was already waiting.
  std::optional<T> try_take() {
    detail::check_revocable_scope(id_);
    std::unique_lock lk(m_);
    if (closed_) raise_closed(lk);
    return take_from_putter();
  }

  // Closing wakes all waiters; their operations raise ChannelClosed, as do all
  // later operations. Idempotent; the first close's reason wins.
  void close() { close_with_error("chan#" + std::to_string(id_) + " closed"); }

  void close_with_error(std::string reason) {
    {
      std::lock_guard lk(m_);
      if (closed_) return;
      closed_ = true;
      close_reason_ = std::move(reason);
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lk(m_);
    return closed_;
  }

 private:
  struct PutNode {
    explicit PutNode(T v) : value(std::move(v)) {}
    T value;
    bool matched = false;
    bool withdrawn = false;
  };
  struct TakeNode {
    std::optional<T> value;
    bool withdrawn = false;
  };

  [[noreturn]] void raise_closed(std::unique_lock<std::mutex>& lk) {
    auto reason = close_reason_;
    lk.unlock();
    raise(ErrorKind::ChannelClosed, reason);
  }

  // Hands v to the first live waiting taker; channel lock held.
  bool hand_to_taker(T& v) {
    while (!takers_.empty()) {
      auto node = takers_.front();
      takers_.pop_front();
      if (node->withdrawn) continue;
      node->value = std::move(v);
      cv_.notify_all();
      detect::progress();
      return true;
    }
    return false;
  }

  // Takes the first live waiting putter's value; channel lock held.
  std::optional<T> take_from_putter() {
    while (!putters_.empty()) {
      auto node = putters_.front();
      putters_.pop_front();
      if (node->withdrawn) continue;
      node->matched = true;
      auto v = std::move(node->value);
      cv_.notify_all();
      detect::progress();
      return v;
    }
    return std::nullopt;
  }

  bool put_impl(T v, std::optional<std::chrono::milliseconds> timeout) {
    detail::check_revocable_scope(id_);
    std::unique_lock lk(m_);
    if (closed_) raise_closed(lk);
    if (hand_to_taker(v)) return true;

    auto node = std::make_shared<PutNode>(std::move(v));
    putters_.push_back(node);
    struct Withdraw {
      std::shared_ptr<PutNode> node;
      ~Withdraw() {
        if (!node->matched) node->withdrawn = true;
      }
    } guard{node};  // runs before lk releases on every exit path

    const detect::Resource res{detect::Resource::Kind::ChanPut, id_};
    const auto outcome =
        detect::blocking_wait(lk, cv_, res, /*orchestration=*/false, timeout,
                              [&] { return node->matched || closed_; },
                              /*is_cancellation_point=*/true);
    if (node->matched) return true;
    if (outcome == detect::WaitResult::TimedOut) return false;
    raise_closed(lk);
  }

  std::optional<T> take_impl(std::optional<std::chrono::milliseconds> timeout) {
    detail::check_revocable_scope(id_);
    std::unique_lock lk(m_);
    if (closed_) raise_closed(lk);
    if (auto v = take_from_putter()) return v;

    auto node = std::make_shared<TakeNode>();
    takers_.push_back(node);
    struct Withdraw {
      std::shared_ptr<TakeNode> node;
      ~Withdraw() {
        if (!node->value.has_value()) node->withdrawn = true;
      }
    } guard{node};

    const detect::Resource res{detect::Resource::Kind::ChanTake, id_};
    const auto outcome =
        detect::blocking_wait(lk, cv_, res, /*orchestration=*/false, timeout,
                              [&] { return node->value.has_value() || closed_; },
                              /*is_cancellation_point=*/true);
    if (node->value.has_value()) return std::move(node->value);
    if (outcome == detect::WaitResult::TimedOut) return std::nullopt;
    raise_closed(lk);
  }

  std::uint64_t id_;
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<PutNode>> putters_;
  std::deque<std::shared_ptr<TakeNode>> takers_;
  bool closed_ = false;
  std::string close_reason_;
};

template <typename T>
using ChannelPtr = std::shared_ptr<Channel<T>>;

template <typename T>
ChannelPtr<T> make_channel() {
  return std::make_shared<Channel<T>>();
}

// Runs body on a fresh unit and returns a channel that will hand the body's
// result to exactly one taker. A body error closes the channel with the error
// text instead. Note: spawning itself is not scope-checked; only the channel
// operations inside the body are.
template <typename F>
auto go(F&& body) -> ChannelPtr<std::invoke_result_t<F>> {
  using R = std::invoke_result_t<F>;
  static_assert(!std::is_void_v<R>, "go body must produce a value");
  auto ch = make_channel<R>();
  auto fn = std::function<R()>(std::forward<F>(body));

  auto handle = std::make_shared<detect::UnitHandle>(detect::spawn_unit(
      ScopeKind::go_block(ch->id()), [ch, fn = std::move(fn)] {
        try {
          ch->put(fn());
        } catch (const ScenarioCancelled&) {
          ch->close_with_error("go block on chan#" + std::to_string(ch->id()) + " cancelled");
          throw;
        } catch (const std::exception& e) {
          ch->close_with_error(e.what());
        } catch (...) {
          ch->close_with_error("unknown error in go block");
        }
      }));
  detect::register_resolver({detect::Resource::Kind::ChanTake, ch->id()}, handle->id());

  struct Owned {
    ChannelPtr<R> ch;
    std::shared_ptr<detect::UnitHandle> handle;
  };
  auto owned = std::make_shared<Owned>(Owned{ch, std::move(handle)});
  return ChannelPtr<R>(owned, owned->ch.get());
}

}  // namespace conc
