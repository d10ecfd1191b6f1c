#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"

namespace conc {

// Uncoordinated synchronous reference: reads never block, writes go through a
// version-checked compare-and-set. swap re-runs its function until the install
// succeeds, so the function must be pure; side effects in it are re-executed
// on every retry. Atoms ignore transactions entirely.
template <typename T>
class Atom {
 public:
  explicit Atom(T initial) : value_(std::move(initial)), id_(detail::next_object_id()) {}

  std::uint64_t id() const noexcept { return id_; }

  T deref() const {
    std::lock_guard lk(m_);
    return value_;
  }

  // Unconditional replacement. Bumps the version even when the new value
  // equals the old one, so concurrent swaps still observe a conflict.
  T reset(T v) {
    std::lock_guard lk(m_);
    value_ = std::move(v);
    ++version_;
    detect::progress();
    return value_;
  }

  // Installs v iff the version still equals expected_version.
  bool compare_and_set(std::uint64_t expected_version, T v) {
    std::lock_guard lk(m_);
    if (version_ != expected_version) return false;
    value_ = std::move(v);
    ++version_;
    detect::progress();
    return true;
  }

  // Atomically replaces the value with f(value). f runs outside the atom's
  // internal lock and may be re-executed; each re-execution bumps retry_count
  // and the livelock watchdog. Returns the installed value.
  template <typename F>
  T swap(F&& f) {
    if (mode() == Mode::Guarded) {
      for (const auto& s : detail::scope_stack()) {
        if (s.kind == ScopeKind::Kind::SwapFn && s.id == id_) {
          raise(ErrorKind::ReentrantSwap,
                "swap on atom#" + std::to_string(id_) + " inside its own swap fn");
        }
      }
    }
    detect::RetryLoop loop(detect::RetryKind::SwapRetry, "swap on atom#" + std::to_string(id_));
    while (true) {
      poll_cancel();
      T snapshot;
      std::uint64_t observed;
      {
        std::lock_guard lk(m_);
        snapshot = value_;
        observed = version_;
      }
      T next = with_scope(ScopeKind::swap_fn(id_), [&] { return f(std::as_const(snapshot)); });
      {
        std::lock_guard lk(m_);
        if (version_ == observed) {
          value_ = std::move(next);
          ++version_;
          detect::progress();
          return value_;
        }
      }
      retries_.fetch_add(1, std::memory_order_relaxed);
      loop.bump();
    }
  }

  std::uint64_t version() const {
    std::lock_guard lk(m_);
    return version_;
  }

  // Total swap re-executions over the atom's lifetime.
  std::uint64_t retry_count() const { return retries_.load(std::memory_order_relaxed); }

 private:
  mutable std::mutex m_;
  T value_;
  std::uint64_t version_ = 0;
  std::atomic<std::uint64_t> retries_{0};
  std::uint64_t id_;
};

template <typename T>
using AtomPtr = std::shared_ptr<Atom<T>>;

template <typename T>
AtomPtr<T> make_atom(T initial) {
  return std::make_shared<Atom<T>>(std::move(initial));
}

}  // namespace conc
