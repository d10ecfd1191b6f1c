#include <memory>

#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "conc/harness.hpp"
#include "conc/stm.hpp"
#include "doctest.h"
#include "props.hpp"

using namespace conc;

namespace {

struct RetryCapRestore {
  ~RetryCapRestore() { stm::set_max_retries(10000); }
};

}  // namespace

TEST_CASE("refs read outside transactions and write only inside them") {
  auto r = make_ref<long long>(3);
  CHECK(r->deref() == 3);
  CHECK_THROWS_AS(r->set(4), ConcurrencyError);
  try {
    r->set(4);
  } catch (const ConcurrencyError& e) {
    CHECK(e.kind() == ErrorKind::NotInTransaction);
  }
  long long out = stm::transaction([&] { return r->set(4); });
  CHECK(out == 4);
  CHECK(r->deref() == 4);
}

TEST_CASE("transactions see their own writes before commit") {
  auto r = make_ref<long long>(1);
  stm::transaction([&]() -> long long {
    r->set(10);
    CHECK(r->deref() == 10);   // read-your-own-write
    CHECK(r->commit_version() > 0);
    r->alter([](long long v) { return v + 1; });
    CHECK(r->deref() == 11);
    return 0;
  });
  CHECK(r->deref() == 11);
}

TEST_CASE("in_transaction and attempt counters reflect the open frame") {
  CHECK_FALSE(stm::in_transaction());
  CHECK(stm::current_attempt() == 0);
  stm::transaction([&]() -> long long {
    CHECK(stm::in_transaction());
    CHECK(stm::current_attempt() == 1);
    return 0;
  });
  CHECK_FALSE(stm::in_transaction());
}

TEST_CASE("nested transactions merge into the outer commit") {
  auto r1 = make_ref<long long>(0);
  auto r2 = make_ref<long long>(0);
  std::uint64_t commits_before = stm::commit_count();
  stm::transaction([&]() -> long long {
    r1->set(1);
    stm::transaction([&]() -> long long {
      r2->set(2);
      CHECK(r1->deref() == 1);  // sees the outer write set
      return 0;
    });
    CHECK(r2->deref() == 2);
    return 0;
  });
  CHECK(stm::commit_count() == commits_before + 1);
  CHECK(r1->deref() == 1);
  CHECK(r2->deref() == 2);
}

TEST_CASE("a conflicting commit between read and commit forces a retry") {
  auto pivot = make_ref<long long>(0);
  long long attempts =
      harness::transaction_with_forced_retries(pivot, 1, [] { return static_cast<long long>(stm::current_attempt()); });
  CHECK(attempts == 2);  // one forced retry, then success
}

TEST_CASE("read-only transactions do not advance the commit clock") {
  auto r = make_ref<long long>(5);
  std::uint64_t clock_before = stm::clock_now();
  stm::transaction([&] { return r->deref(); });
  CHECK(stm::clock_now() == clock_before);
}

TEST_CASE("the retry cap aborts hopeless transactions") {
  RetryCapRestore restore;
  stm::set_max_retries(3);
  auto pivot = make_ref<long long>(0);
  bool raised = false;
  try {
    harness::transaction_with_forced_retries(pivot, 1000, [] { return 0LL; });
  } catch (const ConcurrencyError& e) {
    raised = true;
    CHECK(e.kind() == ErrorKind::TxnRetryLimit);
  }
  CHECK(raised);
}

TEST_CASE("snapshot reads never observe a half-committed pair") {
  auto r1 = make_ref<long long>(50);
  auto r2 = make_ref<long long>(50);
  auto writers_done = std::make_shared<std::atomic<bool>>(false);
  auto writer = detect::spawn_unit(ScopeKind::top_level(), [&] {
    for (int i = 0; i < 100; ++i) {
      stm::transaction([&]() -> long long {
        long long moved = r1->deref() - 1;
        r1->set(moved);
        r2->set(100 - moved);
        return 0;
      });
    }
    writers_done->store(true);
  });
  bool torn = false;
  while (!writers_done->load()) {
    long long sum = stm::transaction([&] { return r1->deref() + r2->deref(); });
    if (sum != 100) torn = true;
  }
  writer.join();
  CHECK_FALSE(torn);
  CHECK(r1->deref() + r2->deref() == 100);
}

TEST_CASE("transactional counting is exact") {
  auto r = props::stm_counting();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("contended increments terminate below the retry cap") {
  auto r = props::stm_contention_terminates();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("small random histories are serializable") {
  auto r = props::stm_serializability(200);
  INFO(r.detail);
  CHECK(r.pass);
}
