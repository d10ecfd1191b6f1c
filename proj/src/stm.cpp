#include "conc/stm.hpp"

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

namespace conc::stm {

namespace {

std::atomic<std::uint64_t> g_clock{1};
std::atomic<std::uint64_t> g_commit_count{0};
std::atomic<std::uint64_t> g_max_retries{10000};
std::mutex g_commit_mutex;

constexpr std::chrono::microseconds kBackoffBase{10};
constexpr std::chrono::microseconds kBackoffCap{1000};

}  // namespace

std::uint64_t clock_now() { return g_clock.load(std::memory_order_acquire); }
std::uint64_t commit_count() { return g_commit_count.load(std::memory_order_relaxed); }
std::uint64_t max_retries() { return g_max_retries.load(std::memory_order_relaxed); }
void set_max_retries(std::uint64_t n) { g_max_retries.store(n, std::memory_order_relaxed); }

bool in_transaction() { return current_frame() != nullptr; }

std::uint64_t current_attempt() {
  auto* frame = current_frame();
  return frame == nullptr ? 0 : frame->attempt();
}

void register_abort_hook(std::function<void()> hook) {
  if (auto* frame = current_frame()) frame->add_abort_hook(std::move(hook));
}

void backoff_sleep(std::uint64_t attempt) {
  const auto shift = attempt < 7 ? attempt : std::uint64_t{7};
  auto delay = kBackoffBase * (std::uint64_t{1} << shift);
  if (delay > kBackoffCap) delay = kBackoffCap;
  std::uniform_int_distribution<std::uint64_t> jitter(delay.count() / 2, delay.count());
  std::this_thread::sleep_for(std::chrono::microseconds(jitter(detail::unit().rng)));
}

bool TxnFrame::try_commit() {
  std::lock_guard commit_lk(g_commit_mutex);
  for (const auto& r : reads_) {
    std::lock_guard lk(r.ref->m_);
    if (r.ref->version_ != r.version) return false;
  }
  if (!writes_.empty()) {
    const auto new_version = g_clock.fetch_add(1, std::memory_order_acq_rel) + 1;
    for (auto& w : writes_) w->install(new_version);
  }
  g_commit_count.fetch_add(1, std::memory_order_relaxed);
  abort_hooks_.clear();  // committed: spawned work survives
  detect::progress();
  return true;
}

void TxnFrame::discard_attempt() {
  for (auto& hook : abort_hooks_) hook();
  abort_hooks_.clear();
  reads_.clear();
  read_index_.clear();
  writes_.clear();
  write_index_.clear();
  deferred_.clear();
}

void TxnFrame::fire_deferred() {
  for (auto& effect : deferred_) effect.fire();
  deferred_.clear();
}

}  // namespace conc::stm
