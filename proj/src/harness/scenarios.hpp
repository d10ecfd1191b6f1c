#pragma once

#include <chrono>
#include <functional>
#include <vector>

#include "conc/harness.hpp"

namespace conc::harness {

void append_safety_scenarios(std::vector<ScenarioSpec>& specs);
void append_liveness_scenarios(std::vector<ScenarioSpec>& specs);

namespace scripts {

// Polls pred every couple of milliseconds until it holds or the budget runs
// out; honours scenario cancellation. True iff pred held.
bool poll_until(const std::function<bool()>& pred, std::chrono::milliseconds budget);

}  // namespace scripts

}  // namespace conc::harness
