#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"

namespace conc {

namespace stm {
class TxnFrame;

// Internal control signal: the current attempt observed a value newer than its
// snapshot and must be retried. Caught only by transaction().
struct TxnRetrySignal {};

std::uint64_t clock_now();
std::uint64_t commit_count();     // global count of commit events
std::uint64_t max_retries();      // attempts before TxnRetryLimit
void set_max_retries(std::uint64_t n);
bool in_transaction();
std::uint64_t current_attempt();  // 1-based inside a transaction, else 0
// Guarded mode: runs `hook` if the innermost transaction attempt aborts or
// retries (used to cancel futures spawned inside the attempt). No-op when
// called outside a transaction.
void register_abort_hook(std::function<void()> hook);
void backoff_sleep(std::uint64_t attempt);
}  // namespace stm

// Coordinated synchronous reference. Readable anywhere; writable only inside a
// transaction. In-transaction reads validate against the transaction's
// snapshot and retry the attempt on conflict.
class RefBase {
 public:
  RefBase() : id_(detail::next_object_id()), version_(stm::clock_now()) {}
  virtual ~RefBase() = default;
  std::uint64_t id() const noexcept { return id_; }

  std::uint64_t commit_version() const {
    std::lock_guard lk(m_);
    return version_;
  }

 protected:
  friend class stm::TxnFrame;
  mutable std::mutex m_;
  std::uint64_t id_;
  std::uint64_t version_;
};

template <typename T>
class Ref;

namespace stm {

struct ReadRec {
  RefBase* ref;
  std::uint64_t version;
};

struct WriteRecBase {
  explicit WriteRecBase(RefBase* r) : ref(r) {}
  virtual ~WriteRecBase() = default;
  virtual void install(std::uint64_t new_version) = 0;
  RefBase* ref;
};

template <typename T>
struct WriteRec final : WriteRecBase {
  WriteRec(Ref<T>* r, T v) : WriteRecBase(r), value(std::move(v)) {}
  void install(std::uint64_t new_version) override;
  T value;
};

// State of one open (outermost) transaction on one unit.
class TxnFrame final : public TransactionFrame {
 public:
  TxnFrame() : txn_id_(detail::next_object_id()) {}

  std::uint64_t txn_id() const noexcept override { return txn_id_; }
  void add_deferred(DeferredEffect effect) override { deferred_.push_back(std::move(effect)); }

  void begin_attempt(std::uint64_t attempt) {
    attempt_ = attempt;
    snapshot_ = clock_now();
  }

  std::uint64_t attempt() const noexcept { return attempt_; }
  std::uint64_t snapshot() const noexcept { return snapshot_; }

  void record_read(RefBase* ref, std::uint64_t version) {
    if (read_index_.emplace(ref, reads_.size()).second) reads_.push_back({ref, version});
  }

  WriteRecBase* find_write(RefBase* ref) {
    auto it = write_index_.find(ref);
    return it == write_index_.end() ? nullptr : writes_[it->second].get();
  }

  template <typename T>
  void record_write(Ref<T>* ref, T value) {
    if (auto* rec = find_write(ref)) {
      static_cast<WriteRec<T>*>(rec)->value = std::move(value);
      return;
    }
    write_index_.emplace(ref, writes_.size());
    writes_.push_back(std::make_unique<WriteRec<T>>(ref, std::move(value)));
  }

  void add_abort_hook(std::function<void()> hook) { abort_hooks_.push_back(std::move(hook)); }

  // Validates the read set and installs the write set under the global commit
  // lock; on success clears the abort hooks and returns true.
  bool try_commit();

  // Drops everything captured by the current attempt; runs (then clears) the
  // abort hooks so Guarded mode can cancel futures spawned by the attempt.
  void discard_attempt();

  // Executes deferred effects in enqueue order, exactly once.
  void fire_deferred();

 private:
  std::uint64_t txn_id_;
  std::uint64_t attempt_ = 0;
  std::uint64_t snapshot_ = 0;
  std::vector<ReadRec> reads_;
  std::unordered_map<RefBase*, std::size_t> read_index_;
  std::vector<std::unique_ptr<WriteRecBase>> writes_;
  std::unordered_map<RefBase*, std::size_t> write_index_;
  std::vector<DeferredEffect> deferred_;
  std::vector<std::function<void()>> abort_hooks_;
};

inline TxnFrame* current_frame() {
  return static_cast<TxnFrame*>(detail::unit().active_txn);
}

// Runs body atomically. Nested calls on the same unit merge into the open
// transaction (one commit point). Retries re-execute body from scratch with a
// fresh snapshot after randomized exponential backoff; deferred effects fire
// after the commit's writes are visible.
template <typename F>
auto transaction(F&& body) -> std::invoke_result_t<F> {
  using R = std::invoke_result_t<F>;
  auto& u = detail::unit();
  if (u.active_txn != nullptr) return body();  // merge into the enclosing txn

  TxnFrame frame;
  detect::RetryLoop loop(detect::RetryKind::TxnRetry,
                         "transaction txn#" + std::to_string(frame.txn_id()));
  struct ClearActive {
    detail::UnitState& u;
    ~ClearActive() { u.active_txn = nullptr; }
  } clear{u};
  u.active_txn = &frame;

  const auto limit = max_retries();
  for (std::uint64_t attempt = 1; attempt <= limit; ++attempt) {
    frame.begin_attempt(attempt);
    try {
      if constexpr (std::is_void_v<R>) {
        with_scope(ScopeKind::transaction(frame.txn_id()), [&] { body(); });
        if (frame.try_commit()) {
          u.active_txn = nullptr;
          frame.fire_deferred();
          return;
        }
      } else {
        R result = with_scope(ScopeKind::transaction(frame.txn_id()), [&] { return body(); });
        if (frame.try_commit()) {
          u.active_txn = nullptr;
          frame.fire_deferred();
          return result;
        }
      }
    } catch (const TxnRetrySignal&) {
      // fall through to retry
    } catch (...) {
      frame.discard_attempt();  // abort: cancel signals, drop captured effects
      throw;
    }
    frame.discard_attempt();
    loop.bump();
    backoff_sleep(attempt);
    poll_cancel();
  }
  raise(ErrorKind::TxnRetryLimit,
        "transaction gave up after " + std::to_string(limit) + " attempts");
}

}  // namespace stm

template <typename T>
class Ref : public RefBase {
 public:
  explicit Ref(T initial) : value_(std::move(initial)) {}

  // Inside a transaction: consistent-snapshot read (retries the attempt when
  // the committed version is newer than the snapshot), reads-your-own-writes.
  // Outside: the committed value.
  T deref() const {
    auto* frame = stm::current_frame();
    if (frame == nullptr) {
      std::lock_guard lk(m_);
      return value_;
    }
    if (auto* rec = frame->find_write(const_cast<Ref<T>*>(this))) {
      return static_cast<stm::WriteRec<T>*>(rec)->value;
    }
    T val;
    std::uint64_t ver;
    {
      std::lock_guard lk(m_);
      val = value_;
      ver = version_;
    }
    if (ver > frame->snapshot()) throw stm::TxnRetrySignal{};
    frame->record_read(const_cast<Ref<T>*>(this), ver);
    return val;
  }

  // Transaction-only write, visible to later reads in the same transaction and
  // installed at commit.
  T set(T v) {
    auto* frame = stm::current_frame();
    if (frame == nullptr) raise(ErrorKind::NotInTransaction, "ref set outside a transaction");
    frame->record_write(this, v);
    return v;
  }

  // set(f(deref())) as one step; still transaction-only.
  template <typename F>
  T alter(F&& f) {
    T next = f(std::as_const(*this).deref());
    set(next);
    return next;
  }

 private:
  friend struct stm::WriteRec<T>;
  T value_;
};

template <typename T>
void stm::WriteRec<T>::install(std::uint64_t new_version) {
  auto* r = static_cast<Ref<T>*>(ref);
  std::lock_guard lk(r->m_);
  r->value_ = value;
  r->version_ = new_version;
}

template <typename T>
using RefPtr = std::shared_ptr<Ref<T>>;

template <typename T>
RefPtr<T> make_ref(T initial) {
  return std::make_shared<Ref<T>>(std::move(initial));
}

}  // namespace conc
