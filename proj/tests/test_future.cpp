#include <atomic>
#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "conc/agent.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "conc/future.hpp"
#include "conc/harness.hpp"
#include "conc/stm.hpp"
#include "doctest.h"
#include "props.hpp"

using namespace conc;
using namespace std::chrono_literals;

namespace {

struct ModeRestore {
  Mode saved = mode();
  ~ModeRestore() { set_mode(saved); }
};

}  // namespace

TEST_CASE("a future resolves to its body result") {
  auto f = spawn_future([] { return 6 * 7; });
  CHECK(f.deref() == 42);
  CHECK(f.state() == FutureState::Resolved);
  CHECK(f.deref() == 42);  // deref is repeatable
}

TEST_CASE("state moves from pending to resolved") {
  auto gate = std::make_shared<detect::Gate>();
  auto f = spawn_future([gate] {
    gate->await();
    return 1;
  });
  CHECK(f.poll() == std::nullopt);
  CHECK(f.state() == FutureState::Pending);
  gate->open();
  CHECK(f.deref() == 1);
  CHECK(f.state() == FutureState::Resolved);
  CHECK(f.poll() == 1);
}

TEST_CASE("a throwing body fails the future and deref rethrows") {
  auto f = spawn_future([]() -> int { throw std::runtime_error("boom in body"); });
  bool raised = false;
  try {
    f.deref();
  } catch (const ConcurrencyError& e) {
    raised = true;
    CHECK(e.kind() == ErrorKind::FutureFailed);
    CHECK(std::string(e.what()).find("boom in body") != std::string::npos);
  }
  CHECK(raised);
  CHECK(f.state() == FutureState::Failed);
}

TEST_CASE("deref_for times out on a parked future") {
  auto gate = std::make_shared<detect::Gate>();
  auto f = spawn_future([gate] {
    gate->await();
    return 1;
  });
  bool timed_out = false;
  try {
    f.deref_for(30ms);
  } catch (const ConcurrencyError& e) {
    timed_out = (e.kind() == ErrorKind::Timeout);
  }
  CHECK(timed_out);
  gate->open();
  CHECK(f.deref() == 1);
}

TEST_CASE("promises deliver once; later deliveries lose") {
  Promise<int> p;
  auto f = p.future();
  CHECK(p.deliver(11));
  CHECK_FALSE(p.deliver(22));
  CHECK(f.deref() == 11);
  auto r = props::promise_single_assignment();
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("cancel interrupts a future parked at a cancellation point") {
  auto gate = std::make_shared<detect::Gate>();
  auto f = spawn_future([gate] {
    gate->await();  // never opened; cancel must break the park
    return 1;
  });
  f.cancel();
  bool cancelled = false;
  try {
    f.deref_for(2000ms);
  } catch (const ConcurrencyError& e) {
    cancelled = (e.kind() == ErrorKind::FutureCancelled);
  }
  CHECK(cancelled);
  CHECK(f.state() == FutureState::Cancelled);
}

TEST_CASE("guarded mode rejects blocking deref inside an agent action") {
  ModeRestore restore;
  set_mode(Mode::Guarded);
  auto gate = std::make_shared<detect::Gate>();
  auto f = spawn_future([gate] {
    gate->await();
    return 1;
  });
  auto ag = make_agent<long long>(0);
  ag->send([f](long long v) {
    (void)f.deref();  // would block the executor forever
    return v;
  });
  bool failed = false;
  for (int i = 0; i < 1000 && !failed; ++i) {
    failed = ag->failed();
    std::this_thread::sleep_for(2ms);
  }
  REQUIRE(failed);
  auto err = ag->error();
  REQUIRE(err.has_value());
  CHECK(err->find(to_string(ErrorKind::BlockingReadProhibited)) != std::string::npos);
  gate->open();
  f.deref();
}

TEST_CASE("guarded mode cancels futures spawned by an aborting transaction") {
  ModeRestore restore;
  set_mode(Mode::Guarded);
  auto gate = std::make_shared<detect::Gate>();
  Future<int> f;
  bool aborted = false;
  try {
    stm::transaction([&]() -> long long {
      f = spawn_future([gate] {
        gate->await();  // parked until cancelled
        return 1;
      });
      throw std::runtime_error("abort the attempt");
    });
  } catch (const std::runtime_error&) {
    aborted = true;
  }
  REQUIRE(aborted);
  REQUIRE(f.valid());
  bool cancelled = false;
  try {
    f.deref_for(2000ms);
  } catch (const ConcurrencyError& e) {
    cancelled = (e.kind() == ErrorKind::FutureCancelled);
  }
  CHECK(cancelled);
  CHECK(f.state() == FutureState::Cancelled);
}

TEST_CASE("faithful mode leaves transactional futures running on abort") {
  ModeRestore restore;
  set_mode(Mode::Faithful);
  Future<int> f;
  try {
    stm::transaction([&]() -> long long {
      f = spawn_future([] { return 7; });
      throw std::runtime_error("abort the attempt");
    });
  } catch (const std::runtime_error&) {
  }
  REQUIRE(f.valid());
  CHECK(f.deref() == 7);  // survived the abort: the leak the guard closes
}
