#include <thread>
#include <vector>

#include "conc/context.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "doctest.h"

using namespace conc;

TEST_CASE("mode round-trips and names are stable") {
  set_mode(Mode::Guarded);
  CHECK(mode() == Mode::Guarded);
  CHECK(std::string(to_string(Mode::Guarded)) == "guarded");
  set_mode(Mode::Faithful);
  CHECK(mode() == Mode::Faithful);
  CHECK(std::string(to_string(Mode::Faithful)) == "faithful");
}

TEST_CASE("mode is frozen while a session is active") {
  detect::Session session({});
  CHECK_THROWS_AS(set_mode(Mode::Guarded), ConcurrencyError);
  try {
    set_mode(Mode::Guarded);
  } catch (const ConcurrencyError& e) {
    CHECK(e.kind() == ErrorKind::ModeChangeWhileRunning);
  }
}

TEST_CASE("scope stack starts at top level and nests with with_scope") {
  auto ctx = current_context();
  REQUIRE(ctx.scope_stack.size() == 1);
  CHECK(ctx.scope_stack.front().kind == ScopeKind::Kind::TopLevel);

  with_scope(ScopeKind::transaction(7), [] {
    with_scope(ScopeKind::swap_fn(3), [] {
      auto inner = current_context();
      REQUIRE(inner.scope_stack.size() == 3);
      CHECK(inner.contains(ScopeKind::Kind::Transaction));
      CHECK(inner.contains(ScopeKind::Kind::SwapFn));
      CHECK_FALSE(inner.contains(ScopeKind::Kind::AgentAction));
      const ScopeKind* txn = inner.innermost(ScopeKind::Kind::Transaction);
      REQUIRE(txn != nullptr);
      CHECK(txn->id == 7);
    });
  });
  CHECK(current_context().scope_stack.size() == 1);
}

TEST_CASE("snapshots are immutable copies") {
  ContextSnapshot snap;
  with_scope(ScopeKind::go_block(9), [&] { snap = current_context(); });
  // The scope was popped, but the snapshot still shows it.
  CHECK(snap.contains(ScopeKind::Kind::GoBlock));
  CHECK_FALSE(current_context().contains(ScopeKind::Kind::GoBlock));
}

TEST_CASE("spawned units get fresh stacks, not the spawner's") {
  with_scope(ScopeKind::transaction(11), [] {
    auto h = detect::spawn_unit(ScopeKind::top_level(), [] {
      auto ctx = current_context();
      CHECK(ctx.scope_stack.size() == 1);
      CHECK_FALSE(ctx.contains(ScopeKind::Kind::Transaction));
    });
    h.join();
  });
}

TEST_CASE("spawned units carry the requested initial scope") {
  auto h = detect::spawn_unit(ScopeKind::future_body(21), [] {
    auto ctx = current_context();
    REQUIRE(ctx.scope_stack.size() == 2);
    CHECK(ctx.scope_stack.back().kind == ScopeKind::Kind::FutureBody);
    CHECK(ctx.scope_stack.back().id == 21);
  });
  h.join();
}

TEST_CASE("unit ids are distinct across threads") {
  std::uint64_t here = unit_id();
  std::uint64_t there = 0;
  std::thread t([&] { there = unit_id(); });
  t.join();
  CHECK(here != 0);
  CHECK(there != 0);
  CHECK(here != there);
}

TEST_CASE("deferring an effect outside any transaction is rejected") {
  CHECK_THROWS_AS(
      defer_until_commit(DeferredEffect{DeferredEffect::Kind::AgentSend, 1, 0, [] {}}),
      ConcurrencyError);
  try {
    defer_until_commit(DeferredEffect{DeferredEffect::Kind::AgentSend, 1, 0, [] {}});
  } catch (const ConcurrencyError& e) {
    CHECK(e.kind() == ErrorKind::NotInTransaction);
  }
}

TEST_CASE("scope descriptions name the region and object") {
  CHECK(ScopeKind::swap_fn(5).describe() == "swap-fn(atom#5)");
  CHECK(ScopeKind::transaction(5).describe() == "transaction(txn#5)");
  CHECK(ScopeKind::top_level().describe() == "top-level");
}
