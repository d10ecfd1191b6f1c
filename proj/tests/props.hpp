#pragma once

// Property checks shared by the unit suites and the acceptance runner. Each
// returns pass/fail plus a short human-readable detail line.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conc/agent.hpp"
#include "conc/atom.hpp"
#include "conc/channel.hpp"
#include "conc/detect.hpp"
#include "conc/errors.hpp"
#include "conc/future.hpp"
#include "conc/stm.hpp"

namespace props {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// 4 units x 1000 increments through swap; every increment must land.
inline CheckResult atom_linearizability() {
  auto a = conc::make_atom<long long>(0);
  std::vector<conc::detect::UnitHandle> units;
  for (int u = 0; u < 4; ++u) {
    units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [a] {
      for (int i = 0; i < 1000; ++i) a->swap([](long long v) { return v + 1; });
    }));
  }
  for (auto& h : units) h.join();
  long long total = a->deref();
  std::ostringstream os;
  os << "4x1000 swaps -> " << total << " (retries " << a->retry_count() << ")";
  return {total == 4000, os.str()};
}

// 1000 trials of two units racing to deliver one promise; exactly one wins.
inline CheckResult promise_single_assignment() {
  for (int trial = 0; trial < 1000; ++trial) {
    conc::Promise<long long> p;
    auto wins = std::make_shared<std::atomic<int>>(0);
    auto deliver = [p, wins](long long v) {
      return [p, wins, v] {
        if (p.deliver(v)) wins->fetch_add(1);
      };
    };
    auto u1 = conc::detect::spawn_unit(conc::ScopeKind::top_level(), deliver(1));
    auto u2 = conc::detect::spawn_unit(conc::ScopeKind::top_level(), deliver(2));
    u1.join();
    u2.join();
    long long v = p.future().deref();
    if (wins->load() != 1 || (v != 1 && v != 2)) {
      return {false, "trial " + std::to_string(trial) + ": " + std::to_string(wins->load()) +
                         " winning deliveries, value " + std::to_string(v)};
    }
  }
  return {true, "1000 racing trials, exactly one winning delivery each"};
}

// 4 producers x 1000 tagged values, 4 consumers x 1000 takes; the received
// multiset must equal the sent multiset.
inline CheckResult channel_exactly_once() {
  auto ch = conc::make_channel<long long>();
  std::vector<conc::detect::UnitHandle> units;
  for (int p = 0; p < 4; ++p) {
    units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [ch, p] {
      for (int i = 0; i < 1000; ++i) ch->put(static_cast<long long>(p) * 10000 + i);
    }));
  }
  auto received = std::make_shared<std::vector<long long>>();
  auto rm = std::make_shared<std::mutex>();
  for (int c = 0; c < 4; ++c) {
    units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [ch, received, rm] {
      std::vector<long long> local;
      local.reserve(1000);
      for (int i = 0; i < 1000; ++i) local.push_back(ch->take());
      std::lock_guard lk(*rm);
      received->insert(received->end(), local.begin(), local.end());
    }));
  }
  for (auto& h : units) h.join();

  std::vector<long long> sent;
  sent.reserve(4000);
  for (int p = 0; p < 4; ++p) {
    for (int i = 0; i < 1000; ++i) sent.push_back(static_cast<long long>(p) * 10000 + i);
  }
  std::sort(sent.begin(), sent.end());
  std::sort(received->begin(), received->end());
  bool same = sent == *received;
  return {same, same ? "multiset of 4000 sent values == multiset received"
                     : "received multiset differs from sent"};
}

// Action intervals never overlap and tags from one sender arrive in order.
inline CheckResult agent_serial_fifo() {
  using clock = std::chrono::steady_clock;
  struct Interval {
    clock::time_point enter, exit;
  };
  auto intervals = std::make_shared<std::vector<Interval>>();
  auto im = std::make_shared<std::mutex>();
  auto ag = conc::make_agent<long long>(0);
  std::vector<conc::detect::UnitHandle> senders;
  for (int u = 0; u < 2; ++u) {
    senders.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [ag, intervals, im] {
      for (int i = 0; i < 50; ++i) {
        ag->send([intervals, im](long long s) {
          Interval iv;
          iv.enter = clock::now();
          std::atomic<int> spin{0};
          while (spin.fetch_add(1, std::memory_order_relaxed) < 100) {
          }
          iv.exit = clock::now();
          std::lock_guard lk(*im);
          intervals->push_back(iv);
          return s + 1;
        });
      }
    }));
  }
  for (auto& h : senders) h.join();
  ag->await();
  if (ag->deref() != 100) return {false, "agent processed " + std::to_string(ag->deref())};
  {
    std::lock_guard lk(*im);
    auto ivs = *intervals;
    std::sort(ivs.begin(), ivs.end(),
              [](const Interval& a, const Interval& b) { return a.enter < b.enter; });
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i].enter < ivs[i - 1].exit) {
        return {false, "action intervals overlap at index " + std::to_string(i)};
      }
    }
  }

  auto trace = conc::make_agent<std::vector<int>>(std::vector<int>{});
  for (int i = 1; i <= 100; ++i) {
    trace->send([i](const std::vector<int>& v) {
      auto out = v;
      out.push_back(i);
      return out;
    });
  }
  trace->await();
  auto seen = trace->deref();
  for (int i = 1; i <= 100; ++i) {
    if (seen[static_cast<std::size_t>(i - 1)] != i) {
      return {false, "tag order broken at position " + std::to_string(i)};
    }
  }
  return {true, "100 non-overlapping serial actions; 100 tags in FIFO order"};
}

// 3 units x 20 transactional increments must produce exactly 60.
inline CheckResult stm_counting() {
  auto r = conc::make_ref<long long>(0);
  std::vector<conc::detect::UnitHandle> units;
  for (int u = 0; u < 3; ++u) {
    units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [r] {
      for (int i = 0; i < 20; ++i) {
        conc::stm::transaction([&] { return r->alter([](long long v) { return v + 1; }); });
      }
    }));
  }
  for (auto& h : units) h.join();
  long long total = r->deref();
  return {total == 60, "3x20 transactional increments -> " + std::to_string(total)};
}

// Two units hammering one ref terminate without hitting the retry cap.
inline CheckResult stm_contention_terminates() {
  conc::stm::set_max_retries(10000);
  auto r = conc::make_ref<long long>(0);
  bool capped = false;
  std::vector<conc::detect::UnitHandle> units;
  auto cm = std::make_shared<std::mutex>();
  auto flag = std::make_shared<bool>(false);
  for (int u = 0; u < 2; ++u) {
    units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [r, cm, flag] {
      try {
        for (int i = 0; i < 200; ++i) {
          conc::stm::transaction([&] { return r->alter([](long long v) { return v + 1; }); });
        }
      } catch (const conc::ConcurrencyError&) {
        std::lock_guard lk(*cm);
        *flag = true;
      }
    }));
  }
  for (auto& h : units) h.join();
  {
    std::lock_guard lk(*cm);
    capped = *flag;
  }
  long long total = r->deref();
  if (capped) return {false, "a transaction hit the retry cap"};
  return {total == 400, "2x200 contended increments -> " + std::to_string(total)};
}

// Random small histories of concurrent transactions must match some serial
// order, verified by brute-force permutation replay.
inline CheckResult stm_serializability(int histories) {
  for (int h = 0; h < histories; ++h) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(h));
    const int nrefs = 1 + static_cast<int>(rng() % 3);
    const int ntxns = 2 + static_cast<int>(rng() % 4);

    struct TxnProgram {
      std::vector<int> writes;                       // refs written, in order
      std::array<std::array<long long, 3>, 3> coef;  // coef[w][r]
      std::array<long long, 3> cst;
    };
    std::array<long long, 3> initial{};
    for (int i = 0; i < nrefs; ++i) initial[static_cast<std::size_t>(i)] = static_cast<long long>(rng() % 10);
    std::vector<TxnProgram> programs;
    for (int t = 0; t < ntxns; ++t) {
      TxnProgram prog{};
      for (int w = 0; w < nrefs; ++w) {
        if (rng() % 2 == 0) prog.writes.push_back(w);
        for (int r = 0; r < nrefs; ++r) {
          prog.coef[static_cast<std::size_t>(w)][static_cast<std::size_t>(r)] =
              static_cast<long long>(rng() % 3);
        }
        prog.cst[static_cast<std::size_t>(w)] = static_cast<long long>(rng() % 10);
      }
      programs.push_back(std::move(prog));
    }

    std::vector<conc::RefPtr<long long>> refs;
    for (int i = 0; i < nrefs; ++i) {
      refs.push_back(conc::make_ref<long long>(initial[static_cast<std::size_t>(i)]));
    }
    std::vector<conc::detect::UnitHandle> units;
    for (const auto& prog : programs) {
      units.push_back(conc::detect::spawn_unit(conc::ScopeKind::top_level(), [&refs, &prog, nrefs] {
        conc::stm::transaction([&]() -> long long {
          std::array<long long, 3> v{};
          for (int i = 0; i < nrefs; ++i) v[static_cast<std::size_t>(i)] = refs[static_cast<std::size_t>(i)]->deref();
          for (int w : prog.writes) {
            long long nv = prog.cst[static_cast<std::size_t>(w)];
            for (int r = 0; r < nrefs; ++r) {
              nv += prog.coef[static_cast<std::size_t>(w)][static_cast<std::size_t>(r)] *
                    v[static_cast<std::size_t>(r)];
            }
            refs[static_cast<std::size_t>(w)]->set(nv);
          }
          return 0;
        });
      }));
    }
    for (auto& u : units) u.join();
    std::array<long long, 3> observed{};
    for (int i = 0; i < nrefs; ++i) observed[static_cast<std::size_t>(i)] = refs[static_cast<std::size_t>(i)]->deref();

    // Replay every serial order of the same programs on a plain array.
    std::vector<int> order(static_cast<std::size_t>(ntxns));
    std::iota(order.begin(), order.end(), 0);
    bool matched = false;
    do {
      std::array<long long, 3> state = initial;
      for (int t : order) {
        const auto& prog = programs[static_cast<std::size_t>(t)];
        std::array<long long, 3> v = state;
        for (int w : prog.writes) {
          long long nv = prog.cst[static_cast<std::size_t>(w)];
          for (int r = 0; r < nrefs; ++r) {
            nv += prog.coef[static_cast<std::size_t>(w)][static_cast<std::size_t>(r)] *
                  v[static_cast<std::size_t>(r)];
          }
          state[static_cast<std::size_t>(w)] = nv;
        }
      }
      if (state == observed) {
        matched = true;
        break;
      }
    } while (std::next_permutation(order.begin(), order.end()));
    if (!matched) {
      return {false, "history " + std::to_string(h) + " matches no serial order"};
    }
  }
  return {true, std::to_string(histories) + " random histories all serializable"};
}

}  // namespace props
