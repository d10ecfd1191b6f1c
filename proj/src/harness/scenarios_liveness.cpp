#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenarios.hpp"

namespace conc::harness {

using namespace std::chrono_literals;
using I = ScenarioEnv::I;

namespace {

// Reports the agent's captured error as an ErrorRaised verdict when it carries
// the expected kind; Internal otherwise so a mismatch is visible.
Verdict verdict_from_agent_error(const AgentPtr<I>& ag, ErrorKind want) {
  std::string err = ag->error().value_or("");
  if (err.find(to_string(want)) != std::string::npos) {
    return Verdict::raised(want, err);
  }
  return Verdict::raised(ErrorKind::Internal, "agent failed with unexpected error: " + err);
}

}  // namespace

void append_liveness_scenarios(std::vector<ScenarioSpec>& specs) {
  // ----- atoms as the outer scope -----

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-atoms",
      .outer = ModelId::Atoms,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .exhibit = "cross-swap-terminates",
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "two units swap distinct atoms while reading the other; at "
                 "least one install always succeeds, so both loops terminate",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto b = env.atom(0);
        auto& u1 = env.spawn([a, b] {
          for (int i = 0; i < 200; ++i) {
            a->swap([b](I v) {
              b->deref();
              return v + 1;
            });
          }
        });
        auto& u2 = env.spawn([a, b] {
          for (int i = 0; i < 200; ++i) {
            b->swap([a](I v) {
              a->deref();
              return v + 1;
            });
          }
        });
        u1.join();
        u2.join();
        if (a->deref() == 200 && b->deref() == 200) {
          return Verdict::ok("cross-reading swap loops terminated");
        }
        return Verdict::race("cross-reading swaps lost updates");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-atoms-samecell",
      .outer = ModelId::Atoms,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .exhibit = "reentrant-swap-livelock",
      .cell_scenario = false,
      .faithful = Expected::livelock(),
      .guarded = Expected::raised(ErrorKind::ReentrantSwap),
      .summary = "a swap function swaps the same atom; the inner install bumps "
                 "the version, so the outer install can never succeed",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        a->swap([a](I v) {
          a->swap([](I x) { return x + 1; });
          return v + 1;
        });
        return Verdict::ok("reentrant swap returned");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-agents",
      .outer = ModelId::Atoms,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a swap function only sends to an agent; re-executions duplicate "
                 "work but the loop terminates",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto ag = env.agent(0);
        swap_with_forced_retries(a, 2, [&](I v) {
          ag->send([](I s) { return s + 1; });
          return v + 1;
        });
        ag->await();
        return Verdict::ok("swap with fire-and-forget sends terminated");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-agents-awaitswap",
      .outer = ModelId::Atoms,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .exhibit = "await-in-swap-livelock",
      .cell_scenario = false,
      .faithful = Expected::livelock(),
      .guarded = Expected::raised(ErrorKind::AwaitProhibited),
      .summary = "a swap function awaits an agent whose action rewrites the "
                 "atom; every attempt is invalidated before it can install",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto ag = env.agent(0);
        a->swap([a, ag](I v) {
          ag->send([a](I s) {
            a->reset(a->deref());
            return s + 1;
          });
          ag->await();
          return v + 1;
        });
        return Verdict::ok("await-in-swap returned");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-refs",
      .outer = ModelId::Atoms,
      .inner = ModelId::Refs,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a swap function runs a small transaction; both retry loops "
                 "terminate",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto r = env.ref(0);
        swap_with_forced_retries(a, 2, [&](I v) {
          stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
          return v + 1;
        });
        return Verdict::ok("transactions inside swap attempts terminated");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-futprom",
      .outer = ModelId::Atoms,
      .inner = ModelId::FutProm,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a swap function derefs an already-settled future; each attempt "
                 "returns immediately",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto f = env.future([]() -> I { return 7; });
        f.deref();
        swap_with_forced_retries(a, 2, [&](I) { return f.deref(); });
        if (a->deref() != 7) return Verdict::race("settled deref changed value");
        return Verdict::ok("settled-future derefs inside swap terminated");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-atoms-channels",
      .outer = ModelId::Atoms,
      .inner = ModelId::Channels,
      .property = Property::Liveness,
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "a swap function spawns a go block whose result is never taken; "
                 "the go block parks forever on the rendezvous put",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        a->swap([&env](I v) {
          env.go_unit([]() -> I { return 1; });
          return v + 1;
        });
        return Verdict::ok("swap returned; the go block is still parked");
      }});

  // ----- agents as the outer scope -----

  specs.push_back(ScenarioSpec{
      .id = "L-agents-atoms",
      .outer = ModelId::Agents,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions swap an atom; the queue drains completely",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto a = env.atom(0);
        for (int i = 0; i < 200; ++i) {
          ag->send([a](I s) {
            a->swap([](I x) { return x + 1; });
            return s + 1;
          });
        }
        ag->await();
        if (ag->deref() == 200 && a->deref() == 200) {
          return Verdict::ok("queue of atom-swapping actions drained");
        }
        return Verdict::race("actions lost updates");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-agents-agents",
      .outer = ModelId::Agents,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .faithful = Expected::raised(ErrorKind::AwaitProhibited),
      .guarded = Expected::raised(ErrorKind::AwaitProhibited),
      .summary = "an action awaits another agent; awaiting inside an action is "
                 "rejected outright instead of risking executor starvation",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto first = env.agent(0);
        auto second = env.agent(0);
        first->send([second](I v) {
          second->send([](I x) { return x + 1; });
          second->await();
          return v + 1;
        });
        if (!scripts::poll_until([&] { return first->failed(); }, 2000ms)) {
          return Verdict::ok("await inside the action completed");
        }
        return verdict_from_agent_error(first, ErrorKind::AwaitProhibited);
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-agents-refs",
      .outer = ModelId::Agents,
      .inner = ModelId::Refs,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions run transactions; the queue drains completely",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto r = env.ref(0);
        for (int i = 0; i < 200; ++i) {
          ag->send([r](I s) {
            stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
            return s + 1;
          });
        }
        ag->await();
        if (r->deref() == 200) return Verdict::ok("queue of transactional actions drained");
        return Verdict::race("actions lost commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-agents-futprom",
      .outer = ModelId::Agents,
      .inner = ModelId::FutProm,
      .property = Property::Liveness,
      .exhibit = "promise-self-deadlock",
      .faithful = Expected::deadlock(),
      .guarded = Expected::raised(ErrorKind::BlockingReadProhibited),
      .summary = "an action derefs a promise that only a later action of the "
                 "same agent would deliver; the serial queue can never advance",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto p = env.promise();
        ag->send([p](I v) { return v + p.future().deref(); });
        ag->send([p](I v) {
          p.deliver(5);
          return v;
        });
        if (scripts::poll_until([&] { return ag->failed(); }, 300ms)) {
          return verdict_from_agent_error(ag, ErrorKind::BlockingReadProhibited);
        }
        return Verdict::ok("both actions queued; the first blocks the queue");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-agents-channels",
      .outer = ModelId::Agents,
      .inner = ModelId::Channels,
      .property = Property::Liveness,
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "an action puts on a rendezvous channel with no taker; the "
                 "executor parks and the queue never drains",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto ch = env.channel();
        ag->send([ch](I v) {
          ch->put(1);
          return v + 1;
        });
        return Verdict::ok("action parked on an unbuffered put");
      }});

  // ----- refs as the outer scope -----

  specs.push_back(ScenarioSpec{
      .id = "L-refs-atoms",
      .outer = ModelId::Refs,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a transaction swaps an atom; both retry loops terminate",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto a = env.atom(0);
        transaction_with_forced_retries(pivot, 2, [&]() -> I {
          a->swap([](I x) { return x + 1; });
          return 0;
        });
        return Verdict::ok("transaction with atom side effects terminated");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-refs-agents",
      .outer = ModelId::Refs,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .faithful = Expected::raised(ErrorKind::AwaitProhibited),
      .guarded = Expected::raised(ErrorKind::AwaitProhibited),
      .summary = "a transaction awaits an agent it just sent to; since the send "
                 "is held until commit, the await is rejected outright",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r = env.ref(0);
        auto ag = env.agent(0);
        stm::transaction([&]() -> I {
          r->deref();
          ag->send([](I s) { return s + 1; });
          ag->await();
          return 0;
        });
        return Verdict::ok("await inside transaction returned");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-refs-refs",
      .outer = ModelId::Refs,
      .inner = ModelId::Refs,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "contending units run nested transactions; merging keeps one "
                 "commit point per outer transaction and all loops terminate",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r1 = env.ref(0);
        auto r2 = env.ref(0);
        auto worker = [r1, r2] {
          for (int i = 0; i < 50; ++i) {
            stm::transaction([&]() -> I {
              r1->alter([](I x) { return x + 1; });
              stm::transaction([&] { return r2->alter([](I x) { return x + 1; }); });
              return 0;
            });
          }
        };
        auto& u1 = env.spawn(worker);
        auto& u2 = env.spawn(worker);
        u1.join();
        u2.join();
        if (r1->deref() == 100 && r2->deref() == 100) {
          return Verdict::ok("nested contending transactions terminated");
        }
        return Verdict::race("nested transactions lost commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-refs-futprom",
      .outer = ModelId::Refs,
      .inner = ModelId::FutProm,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a transaction derefs an already-settled future on every "
                 "attempt; the retry loop terminates",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto r = env.ref(0);
        auto f = env.future([]() -> I { return 7; });
        f.deref();
        transaction_with_forced_retries(pivot, 2, [&]() -> I {
          r->set(f.deref());
          return 0;
        });
        if (r->deref() != 7) return Verdict::race("settled deref changed value");
        return Verdict::ok("settled-future derefs inside attempts terminated");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-refs-channels",
      .outer = ModelId::Refs,
      .inner = ModelId::Channels,
      .property = Property::Liveness,
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "a transaction spawns a go block whose result is never taken; "
                 "the go block parks forever on the rendezvous put",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        stm::transaction([&]() -> I {
          pivot->deref();
          env.go_unit([]() -> I { return 1; });
          return 0;
        });
        return Verdict::ok("transaction committed; the go block is still parked");
      }});

  // ----- futures as the outer scope -----

  specs.push_back(ScenarioSpec{
      .id = "L-futures-atoms",
      .outer = ModelId::FutProm,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "future bodies run swap loops; both derefs settle",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto body = [a]() -> I {
          for (int i = 0; i < 100; ++i) a->swap([](I x) { return x + 1; });
          return 0;
        };
        auto f1 = env.future(body);
        auto f2 = env.future(body);
        f1.deref();
        f2.deref();
        if (a->deref() == 200) return Verdict::ok("swap loops inside futures terminated");
        return Verdict::race("swap loops lost updates");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-futures-agents",
      .outer = ModelId::FutProm,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .exhibit = "await-deref-cycle",
      .faithful = Expected::deadlock(),
      .guarded = Expected::raised(ErrorKind::BlockingReadProhibited),
      .summary = "an action derefs a future whose body awaits that same agent; "
                 "executor and future body wait on each other forever",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto flag = env.atom(0);
        auto started = env.gate();
        auto f = env.future([started, ag]() -> I {
          started->await();
          ag->await();
          return 42;
        });
        ag->send([flag, f](I v) {
          flag->reset(1);
          return v + f.deref();
        });
        if (!scripts::poll_until([&] { return flag->deref() == 1; }, 2000ms)) {
          return Verdict::raised(ErrorKind::Internal, "the action never started");
        }
        started->open();
        if (scripts::poll_until([&] { return ag->failed(); }, 300ms)) {
          return verdict_from_agent_error(ag, ErrorKind::BlockingReadProhibited);
        }
        return Verdict::ok("future body and executor are mutually waiting");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-futures-refs",
      .outer = ModelId::FutProm,
      .inner = ModelId::Refs,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "future bodies run contending transactions; both derefs settle",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r = env.ref(0);
        auto body = [r]() -> I {
          for (int i = 0; i < 100; ++i) {
            stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
          }
          return 0;
        };
        auto f1 = env.future(body);
        auto f2 = env.future(body);
        f1.deref();
        f2.deref();
        if (r->deref() == 200) return Verdict::ok("transaction loops inside futures terminated");
        return Verdict::race("transaction loops lost commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-futures-futprom",
      .outer = ModelId::FutProm,
      .inner = ModelId::FutProm,
      .property = Property::Liveness,
      .exhibit = "mutual-future-deadlock",
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "two futures deref each other; neither body can ever settle",
      .script = [](ScenarioEnv& env) -> Verdict {
        struct Pair {
          detect::GatePtr ready;
          std::optional<Future<I>> a, b;
        };
        auto st = std::make_shared<Pair>();
        st->ready = env.gate();
        auto f1 = env.future([st]() -> I {
          st->ready->await();
          return st->b->deref();
        });
        auto f2 = env.future([st]() -> I {
          st->ready->await();
          return st->a->deref();
        });
        st->a = f1;
        st->b = f2;
        st->ready->open();
        return Verdict::ok("mutual derefs issued");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-futures-channels",
      .outer = ModelId::FutProm,
      .inner = ModelId::Channels,
      .property = Property::Liveness,
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "a future body puts on a rendezvous channel with no taker; the "
                 "body parks forever",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ch = env.channel();
        env.future([ch]() -> I {
          ch->put(7);
          return 0;
        });
        return Verdict::ok("future body parked on an unbuffered put");
      }});

  // ----- channels as the outer scope -----

  specs.push_back(ScenarioSpec{
      .id = "L-channels-atoms",
      .outer = ModelId::Channels,
      .inner = ModelId::Atoms,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "go blocks run swap loops; both results arrive",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto body = [a]() -> I {
          for (int i = 0; i < 100; ++i) a->swap([](I x) { return x + 1; });
          return 0;
        };
        auto g1 = env.go_unit(body);
        auto g2 = env.go_unit(body);
        g1->take();
        g2->take();
        if (a->deref() == 200) return Verdict::ok("swap loops inside go blocks terminated");
        return Verdict::race("swap loops lost updates");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-channels-agents",
      .outer = ModelId::Channels,
      .inner = ModelId::Agents,
      .property = Property::Liveness,
      .exhibit = "await-before-put-deadlock",
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "a go block awaits an agent whose action is parked on a put that "
                 "only the go block itself would take after the await",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto ch = env.channel();
        env.go_unit([ag, ch]() -> I {
          ag->send([ch](I v) {
            ch->put(1);
            return v + 1;
          });
          ag->await();
          return ch->take();
        });
        return Verdict::ok("go block awaits the agent before taking");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-channels-refs",
      .outer = ModelId::Channels,
      .inner = ModelId::Refs,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "go blocks run contending transactions; both results arrive",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r = env.ref(0);
        auto body = [r]() -> I {
          for (int i = 0; i < 100; ++i) {
            stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
          }
          return 0;
        };
        auto g1 = env.go_unit(body);
        auto g2 = env.go_unit(body);
        g1->take();
        g2->take();
        if (r->deref() == 200) return Verdict::ok("transaction loops inside go blocks terminated");
        return Verdict::race("transaction loops lost commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-channels-futprom",
      .outer = ModelId::Channels,
      .inner = ModelId::FutProm,
      .property = Property::Liveness,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a go block delivers a promise and derefs a settled future; the "
                 "result arrives",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto p = env.promise();
        auto f = env.future([]() -> I { return 42; });
        f.deref();
        auto g = env.go_unit([p, f]() -> I {
          p.deliver(3);
          return f.deref();
        });
        I res = g->take();
        if (res == 42 && p.future().deref() == 3) {
          return Verdict::ok("go block settled both observations");
        }
        return Verdict::race("go block observed wrong values");
      }});

  specs.push_back(ScenarioSpec{
      .id = "L-channels-channels",
      .outer = ModelId::Channels,
      .inner = ModelId::Channels,
      .property = Property::Liveness,
      .faithful = Expected::deadlock(),
      .guarded = Expected::deadlock(),
      .summary = "two go blocks each take before putting; both park forever on "
                 "empty rendezvous channels",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ch1 = env.channel();
        auto ch2 = env.channel();
        env.go_unit([ch1, ch2]() -> I {
          ch2->put(ch1->take() + 1);
          return 0;
        });
        env.go_unit([ch1, ch2]() -> I {
          ch1->put(ch2->take() + 1);
          return 0;
        });
        return Verdict::ok("both go blocks take first");
      }});
}

}  // namespace conc::harness
