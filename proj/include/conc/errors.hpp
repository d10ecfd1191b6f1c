#pragma once

#include <stdexcept>
#include <string>

namespace conc {

// Every error the runtime can raise, across all models. Scenario verdicts and
// the CLI report errors by this kind, so the set is closed and stringly stable.
enum class ErrorKind {
  NotInTransaction,
  ModeChangeWhileRunning,
  AgentFailed,
  AwaitProhibited,
  Timeout,
  ReentrantSwap,
  TxnRetryLimit,
  FutureFailed,
  FutureCancelled,
  BlockingReadProhibited,
  IrrevocableInRetryScope,
  ChannelClosed,
  UnknownScenario,
  ScenarioTimeout,
  SinkUnwritable,
  Internal,
};

const char* to_string(ErrorKind kind) noexcept;

class ConcurrencyError : public std::runtime_error {
 public:
  ConcurrencyError(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + (msg.empty() ? "" : ": " + msg)),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg = {}) {
  throw ConcurrencyError(kind, msg);
}

// Internal signal thrown through an execution unit when its scenario is torn
// down. Never reaches user code: unit wrappers catch it and exit the unit.
struct ScenarioCancelled {};

// Internal signal thrown through a future body when a pending future observes
// its cancel flag at a cancellation point.
struct FutureCancelSignal {};

}  // namespace conc
