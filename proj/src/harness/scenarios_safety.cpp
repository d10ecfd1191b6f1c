#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "scenarios.hpp"

namespace conc::harness {

using namespace std::chrono_literals;
using I = ScenarioEnv::I;

namespace {

// Spawns `units` workers that each run `per_unit` iterations of op, joins
// them, and reports OK iff check() holds afterwards.
Verdict fan_out(ScenarioEnv& env, int units, int per_unit, const std::function<void()>& op,
                const std::function<bool()>& check, const std::string& what) {
  std::vector<detect::UnitHandle*> workers;
  for (int u = 0; u < units; ++u) {
    workers.push_back(&env.spawn([per_unit, op] {
      for (int i = 0; i < per_unit; ++i) op();
    }));
  }
  for (auto* w : workers) w->join();
  return check() ? Verdict::ok(what + " consistent after " +
                               std::to_string(units * per_unit) + " ops")
                 : Verdict::race(what + " inconsistent after concurrent ops");
}

}  // namespace

void append_safety_scenarios(std::vector<ScenarioSpec>& specs) {
  // ----- atoms as the outer scope: side effects inside swap functions -----

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-atoms",
      .outer = ModelId::Atoms,
      .inner = ModelId::Atoms,
      .property = Property::Safety,
      .exhibit = "torn-invariant",
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function resets a second atom; one forced re-execution "
                 "applies the side effect twice and tears the a+b invariant",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(50);
        auto b = env.atom(50);
        swap_with_forced_retries(a, 1, [&](I v) {
          b->reset(b->deref() - 10);
          return v + 10;
        });
        I sum = a->deref() + b->deref();
        if (sum == 100) return Verdict::ok("invariant a+b==100 held");
        return Verdict::race("invariant a+b==100 torn, sum=" + std::to_string(sum));
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-agents",
      .outer = ModelId::Atoms,
      .inner = ModelId::Agents,
      .property = Property::Safety,
      .exhibit = "duplicated-send",
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function sends to an agent; one forced re-execution "
                 "duplicates the send for a single installed value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto ag = env.agent(0);
        swap_with_forced_retries(a, 1, [&](I v) {
          ag->send([](I s) { return s + 1; });
          return v + 1;
        });
        ag->await();
        I sends = ag->deref();
        if (sends == 1) return Verdict::ok("exactly one send per installed swap");
        return Verdict::race("swap installed once but the agent saw " +
                             std::to_string(sends) + " sends");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-refs",
      .outer = ModelId::Atoms,
      .inner = ModelId::Refs,
      .property = Property::Safety,
      .exhibit = "txn-in-swap-commits-twice",
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function runs a transaction; one forced re-execution "
                 "commits the transaction twice for a single installed value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto r = env.ref(0);
        swap_with_forced_retries(a, 1, [&](I v) {
          stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
          return v + 1;
        });
        I commits = r->deref();
        if (commits == 1) return Verdict::ok("exactly one commit per installed swap");
        return Verdict::race("swap installed once but the ref shows " +
                             std::to_string(commits) + " commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-futprom",
      .outer = ModelId::Atoms,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .exhibit = "swap-deliver-stale",
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function delivers its observed value to a promise; a "
                 "re-execution means the first, stale delivery wins",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(10);
        auto p = env.promise();
        auto attempt = std::make_shared<int>(0);
        a->swap([&, attempt](I v) {
          if (++*attempt == 1) a->reset(99);  // invalidate the first attempt
          p.deliver(v);
          return v + 1;
        });
        I delivered = p.future().deref();
        I installed = a->deref();
        if (delivered == installed - 1) {
          return Verdict::ok("promise observed the committed input");
        }
        return Verdict::race("promise observed stale input " + std::to_string(delivered) +
                             " but the installed value is " + std::to_string(installed));
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-futprom-recreate",
      .outer = ModelId::Atoms,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function spawns a future; one forced re-execution spawns "
                 "two futures for a single installed value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(1);
        auto spawned = std::make_shared<std::vector<Future<I>>>();
        swap_with_forced_retries(a, 1, [&](I v) {
          spawned->push_back(env.future([v]() -> I { return v + 100; }));
          return v + 1;
        });
        for (auto& f : *spawned) f.deref();
        if (spawned->size() == 1) return Verdict::ok("one future per installed swap");
        return Verdict::race(std::to_string(spawned->size()) +
                             " futures spawned for a single installed swap");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-channels",
      .outer = ModelId::Atoms,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::raised(ErrorKind::IrrevocableInRetryScope),
      .summary = "a swap function puts on a rendezvous channel; one forced "
                 "re-execution hands the consumer two messages for one install",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto ch = env.channel();
        auto got = std::make_shared<std::atomic<int>>(0);
        auto& consumer = env.spawn([ch, got] {
          try {
            for (;;) {
              auto v = ch->take_for(300ms);
              if (!v) break;
              got->fetch_add(1);
            }
          } catch (const ConcurrencyError&) {
          }
        });
        swap_with_forced_retries(a, 1, [&](I v) {
          ch->put(1);
          return v + 1;
        });
        ch->close();
        consumer.join();
        int n = got->load();
        if (n == 1) return Verdict::ok("one message per installed swap");
        return Verdict::race("consumer received " + std::to_string(n) +
                             " messages for a single installed swap");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-atoms-channels-gospawn",
      .outer = ModelId::Atoms,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a swap function spawns a go block; one forced re-execution "
                 "spawns two go blocks for a single installed value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        auto results = std::make_shared<std::vector<ChannelPtr<I>>>();
        swap_with_forced_retries(a, 1, [&](I v) {
          results->push_back(env.go_unit([]() -> I { return 1; }));
          return v + 1;
        });
        I total = 0;
        for (auto& ch : *results) total += ch->take();
        if (results->size() == 1) return Verdict::ok("one go block per installed swap");
        return Verdict::race(std::to_string(results->size()) +
                             " go blocks spawned for a single installed swap");
      }});

  // ----- refs as the outer scope: side effects inside transactions -----

  specs.push_back(ScenarioSpec{
      .id = "S-refs-atoms",
      .outer = ModelId::Refs,
      .inner = ModelId::Atoms,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::race(),
      .summary = "a transaction swaps an atom; one forced retry applies the swap "
                 "twice for a single commit",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto a = env.atom(0);
        transaction_with_forced_retries(pivot, 1, [&]() -> I {
          a->swap([](I x) { return x + 1; });
          return 0;
        });
        I swaps = a->deref();
        if (swaps == 1) return Verdict::ok("one atom swap per commit");
        return Verdict::race("transaction committed once but the atom shows " +
                             std::to_string(swaps) + " swaps");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-refs-agents",
      .outer = ModelId::Refs,
      .inner = ModelId::Agents,
      .property = Property::Safety,
      .exhibit = "deferred-send",
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a transaction sends to an agent; sends are held until commit, "
                 "so forced retries never duplicate them",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto ag = env.agent(0);
        transaction_with_forced_retries(pivot, 5, [&]() -> I {
          ag->send([](I s) { return s + 1; });
          return 0;
        });
        ag->await();
        I sends = ag->deref();
        if (sends == 1) return Verdict::ok("exactly one send despite five retries");
        return Verdict::race("agent saw " + std::to_string(sends) +
                             " sends for a single commit");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-refs-refs",
      .outer = ModelId::Refs,
      .inner = ModelId::Refs,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a transaction nested in a transaction merges into the outer "
                 "one and commits exactly once despite forced retries",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto r = env.ref(0);
        transaction_with_forced_retries(pivot, 2, [&]() -> I {
          stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
          return 0;
        });
        I commits = r->deref();
        if (commits == 1) return Verdict::ok("nested transaction merged into one commit");
        return Verdict::race("nested transaction committed " + std::to_string(commits) +
                             " times for a single outer commit");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-refs-futprom",
      .outer = ModelId::Refs,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::ok(),
      .summary = "a transaction delivers a promise; an immediate delivery from an "
                 "aborted attempt wins over the committed value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto r = env.ref(0);
        auto p = env.promise();
        transaction_with_forced_retries(pivot, 1, [&]() -> I {
          I n = static_cast<I>(stm::current_attempt());
          r->set(n);
          p.deliver(n);
          return n;
        });
        I delivered = p.future().deref();
        I committed = r->deref();
        if (delivered == committed) return Verdict::ok("promise observed the committed value");
        return Verdict::race("promise observed " + std::to_string(delivered) +
                             " from an aborted attempt; committed value is " +
                             std::to_string(committed));
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-refs-futprom-cancel",
      .outer = ModelId::Refs,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::ok(),
      .summary = "a transaction spawns a future per attempt; without cancellation "
                 "the aborted attempt's future still runs its effect",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto g = env.gate();
        auto counter = env.atom(0);
        auto spawned = std::make_shared<std::vector<Future<I>>>();
        transaction_with_forced_retries(pivot, 1, [&]() -> I {
          spawned->push_back(env.future([g, counter]() -> I {
            g->await();
            counter->swap([](I x) { return x + 1; });
            return 0;
          }));
          return 0;
        });
        g->open();
        bool settled = scripts::poll_until(
            [&] {
              for (auto& f : *spawned) {
                if (f.state() == FutureState::Pending) return false;
              }
              return true;
            },
            2000ms);
        if (!settled) {
          return Verdict::raised(ErrorKind::Internal, "spawned futures never settled");
        }
        I effects = counter->deref();
        if (effects == 1) return Verdict::ok("only the committed attempt's future ran");
        return Verdict::race(std::to_string(effects) +
                             " future effects observed for a single commit");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-refs-channels",
      .outer = ModelId::Refs,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::race(),
      .guarded = Expected::raised(ErrorKind::IrrevocableInRetryScope),
      .summary = "a transaction puts on a rendezvous channel; one forced retry "
                 "hands the consumer two messages for one commit",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto pivot = env.ref(0);
        auto ch = env.channel();
        auto got = std::make_shared<std::atomic<int>>(0);
        auto& consumer = env.spawn([ch, got] {
          try {
            for (;;) {
              auto v = ch->take_for(300ms);
              if (!v) break;
              got->fetch_add(1);
            }
          } catch (const ConcurrencyError&) {
          }
        });
        transaction_with_forced_retries(pivot, 1, [&]() -> I {
          ch->put(1);
          return 0;
        });
        ch->close();
        consumer.join();
        int n = got->load();
        if (n == 1) return Verdict::ok("one message per commit");
        return Verdict::race("consumer received " + std::to_string(n) +
                             " messages for a single commit");
      }});

  // ----- agents as the outer scope: model ops inside actions -----

  specs.push_back(ScenarioSpec{
      .id = "S-agents-atoms",
      .outer = ModelId::Agents,
      .inner = ModelId::Atoms,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions swap an atom; serial execution keeps agent state and "
                 "atom in lockstep under concurrent senders",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto a = env.atom(0);
        Verdict v = fan_out(
            env, 4, 250,
            [&] {
              ag->send([a](I s) {
                a->swap([](I x) { return x + 1; });
                return s + 1;
              });
            },
            [&] {
              ag->await();
              return ag->deref() == 1000 && a->deref() == 1000;
            },
            "agent state and atom");
        return v;
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-agents-agents",
      .outer = ModelId::Agents,
      .inner = ModelId::Agents,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions on one agent send to a second agent; held sends are "
                 "dispatched exactly once per completed action",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto first = env.agent(0);
        auto second = env.agent(0);
        return fan_out(
            env, 4, 250,
            [&] {
              first->send([second](I s) {
                second->send([](I x) { return x + 1; });
                return s + 1;
              });
            },
            [&] {
              first->await();
              second->await();
              return first->deref() == 1000 && second->deref() == 1000;
            },
            "relayed sends");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-agents-refs",
      .outer = ModelId::Agents,
      .inner = ModelId::Refs,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions run transactions; every action commits exactly once",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto r = env.ref(0);
        return fan_out(
            env, 4, 250,
            [&] {
              ag->send([r](I s) {
                stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
                return s + 1;
              });
            },
            [&] {
              ag->await();
              return ag->deref() == 1000 && r->deref() == 1000;
            },
            "per-action commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-agents-futprom",
      .outer = ModelId::Agents,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "the last action of each sender delivers a promise; deliveries "
                 "are single-assignment and agent state stays serial",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        std::vector<Promise<I>> promises;
        for (int u = 0; u < 4; ++u) promises.push_back(env.promise());
        std::vector<detect::UnitHandle*> senders;
        for (int u = 0; u < 4; ++u) {
          senders.push_back(&env.spawn([ag, p = promises[static_cast<std::size_t>(u)]] {
            for (int k = 0; k < 250; ++k) {
              bool last = k == 249;
              ag->send([p, last](I s) {
                if (last) p.deliver(s + 1);
                return s + 1;
              });
            }
          }));
        }
        for (auto* s : senders) s->join();
        for (auto& p : promises) {
          if (p.future().deref() <= 0) {
            return Verdict::race("a promise observed a non-positive agent value");
          }
        }
        ag->await();
        I total = ag->deref();
        if (total == 1000) return Verdict::ok("1000 actions, 4 deliveries, state serial");
        return Verdict::race("agent state " + std::to_string(total) + " after 1000 sends");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-agents-channels",
      .outer = ModelId::Agents,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "actions rendezvous with a consumer over an unbuffered channel; "
                 "every action hands over exactly one message",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        auto ch = env.channel();
        auto got = std::make_shared<std::atomic<I>>(0);
        auto& consumer = env.spawn([ch, got] {
          try {
            for (;;) {
              auto v = ch->take_for(2000ms);
              if (!v) break;
              got->fetch_add(*v);
            }
          } catch (const ConcurrencyError&) {
          }
        });
        std::vector<detect::UnitHandle*> senders;
        for (int u = 0; u < 4; ++u) {
          senders.push_back(&env.spawn([ag, ch] {
            for (int k = 0; k < 250; ++k) {
              ag->send([ch](I s) {
                ch->put(1);
                return s + 1;
              });
            }
          }));
        }
        for (auto* s : senders) s->join();
        ag->await();
        ch->close();
        consumer.join();
        if (got->load() == 1000 && ag->deref() == 1000) {
          return Verdict::ok("1000 actions, 1000 messages");
        }
        return Verdict::race("consumer total " + std::to_string(got->load()) +
                             " after 1000 put actions");
      }});

  // ----- futures as the outer scope: model ops inside future bodies -----

  specs.push_back(ScenarioSpec{
      .id = "S-futures-atoms",
      .outer = ModelId::FutProm,
      .inner = ModelId::Atoms,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "future bodies hammer one atom with swaps; every increment lands",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        std::vector<Future<I>> fs;
        for (int u = 0; u < 4; ++u) {
          fs.push_back(env.future([a]() -> I {
            for (int i = 0; i < 250; ++i) a->swap([](I x) { return x + 1; });
            return 0;
          }));
        }
        for (auto& f : fs) f.deref();
        I total = a->deref();
        if (total == 1000) return Verdict::ok("1000 swaps across 4 future bodies");
        return Verdict::race("atom shows " + std::to_string(total) + " of 1000 swaps");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-futures-agents",
      .outer = ModelId::FutProm,
      .inner = ModelId::Agents,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "future bodies send to an agent; all sends are processed serially",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        std::vector<Future<I>> fs;
        for (int u = 0; u < 4; ++u) {
          fs.push_back(env.future([ag]() -> I {
            for (int i = 0; i < 250; ++i) ag->send([](I s) { return s + 1; });
            return 0;
          }));
        }
        for (auto& f : fs) f.deref();
        ag->await();
        I total = ag->deref();
        if (total == 1000) return Verdict::ok("1000 sends from 4 future bodies");
        return Verdict::race("agent state " + std::to_string(total) + " after 1000 sends");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-futures-refs",
      .outer = ModelId::FutProm,
      .inner = ModelId::Refs,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "future bodies run contending transactions; all commits land",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r = env.ref(0);
        std::vector<Future<I>> fs;
        for (int u = 0; u < 4; ++u) {
          fs.push_back(env.future([r]() -> I {
            for (int i = 0; i < 250; ++i) {
              stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
            }
            return 0;
          }));
        }
        for (auto& f : fs) f.deref();
        I total = r->deref();
        if (total == 1000) return Verdict::ok("1000 commits across 4 future bodies");
        return Verdict::race("ref shows " + std::to_string(total) + " of 1000 commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-futures-futprom",
      .outer = ModelId::FutProm,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a future delivers a promise and a second future derefs the "
                 "first; acyclic dataflow settles to the expected value",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto p = env.promise();
        auto f1 = env.future([p]() -> I {
          p.deliver(21);
          return p.future().deref();
        });
        auto f2 = env.future([f1]() -> I { return f1.deref() * 2; });
        I out = f2.deref();
        if (out == 42) return Verdict::ok("dataflow chain settled");
        return Verdict::race("dataflow chain produced " + std::to_string(out));
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-futures-channels",
      .outer = ModelId::FutProm,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "producer and consumer future bodies rendezvous over one "
                 "channel; no message is lost or duplicated",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ch = env.channel();
        auto producer = [ch]() -> I {
          for (int i = 0; i < 250; ++i) ch->put(1);
          return 0;
        };
        auto consumer = [ch]() -> I {
          I s = 0;
          for (int i = 0; i < 250; ++i) s += ch->take();
          return s;
        };
        auto p1 = env.future(producer);
        auto p2 = env.future(producer);
        auto c1 = env.future(consumer);
        auto c2 = env.future(consumer);
        I sum = c1.deref() + c2.deref();
        p1.deref();
        p2.deref();
        if (sum == 500) return Verdict::ok("500 messages through the rendezvous");
        return Verdict::race("consumers saw " + std::to_string(sum) + " of 500 messages");
      }});

  // ----- channels as the outer scope: model ops inside go blocks -----

  specs.push_back(ScenarioSpec{
      .id = "S-channels-atoms",
      .outer = ModelId::Channels,
      .inner = ModelId::Atoms,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "go blocks hammer one atom with swaps; every increment lands",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto a = env.atom(0);
        std::vector<ChannelPtr<I>> gs;
        for (int u = 0; u < 4; ++u) {
          gs.push_back(env.go_unit([a]() -> I {
            for (int i = 0; i < 250; ++i) a->swap([](I x) { return x + 1; });
            return 0;
          }));
        }
        for (auto& g : gs) g->take();
        I total = a->deref();
        if (total == 1000) return Verdict::ok("1000 swaps across 4 go blocks");
        return Verdict::race("atom shows " + std::to_string(total) + " of 1000 swaps");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-channels-agents",
      .outer = ModelId::Channels,
      .inner = ModelId::Agents,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "go blocks send to an agent; all sends are processed serially",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ag = env.agent(0);
        std::vector<ChannelPtr<I>> gs;
        for (int u = 0; u < 4; ++u) {
          gs.push_back(env.go_unit([ag]() -> I {
            for (int i = 0; i < 250; ++i) ag->send([](I s) { return s + 1; });
            return 0;
          }));
        }
        for (auto& g : gs) g->take();
        ag->await();
        I total = ag->deref();
        if (total == 1000) return Verdict::ok("1000 sends from 4 go blocks");
        return Verdict::race("agent state " + std::to_string(total) + " after 1000 sends");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-channels-refs",
      .outer = ModelId::Channels,
      .inner = ModelId::Refs,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "go blocks run contending transactions; all commits land",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto r = env.ref(0);
        std::vector<ChannelPtr<I>> gs;
        for (int u = 0; u < 4; ++u) {
          gs.push_back(env.go_unit([r]() -> I {
            for (int i = 0; i < 250; ++i) {
              stm::transaction([&] { return r->alter([](I x) { return x + 1; }); });
            }
            return 0;
          }));
        }
        for (auto& g : gs) g->take();
        I total = r->deref();
        if (total == 1000) return Verdict::ok("1000 commits across 4 go blocks");
        return Verdict::race("ref shows " + std::to_string(total) + " of 1000 commits");
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-channels-futprom",
      .outer = ModelId::Channels,
      .inner = ModelId::FutProm,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a go block delivers a promise and derefs a settled future; "
                 "both observations are exact",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto p = env.promise();
        auto f = env.future([]() -> I { return 42; });
        auto g = env.go_unit([p, f]() -> I {
          p.deliver(3);
          return f.deref();
        });
        I res = g->take();
        I pv = p.future().deref();
        if (res == 42 && pv == 3) return Verdict::ok("go block observed both values");
        return Verdict::race("go block observed " + std::to_string(res) + "/" +
                             std::to_string(pv));
      }});

  specs.push_back(ScenarioSpec{
      .id = "S-channels-channels",
      .outer = ModelId::Channels,
      .inner = ModelId::Channels,
      .property = Property::Safety,
      .faithful = Expected::ok(),
      .guarded = Expected::ok(),
      .summary = "a two-stage go pipeline relays 100 values; the sink sees every "
                 "value exactly once",
      .script = [](ScenarioEnv& env) -> Verdict {
        auto ch1 = env.channel();
        auto ch2 = env.channel();
        auto g1 = env.go_unit([ch1]() -> I {
          for (I i = 1; i <= 100; ++i) ch1->put(i);
          return 0;
        });
        auto g2 = env.go_unit([ch1, ch2]() -> I {
          for (int i = 0; i < 100; ++i) ch2->put(ch1->take() + 1);
          return 0;
        });
        I sum = 0;
        for (int i = 0; i < 100; ++i) sum += ch2->take();
        g1->take();
        g2->take();
        if (sum == 5150) return Verdict::ok("pipeline relayed all 100 values");
        return Verdict::race("pipeline sum " + std::to_string(sum) + ", want 5150");
      }});
}

}  // namespace conc::harness
