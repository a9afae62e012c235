#pragma once

#include <stdexcept>
#include <string>

namespace icrl {

// Exit codes used by the CLI. Library code throws the typed errors below;
// the CLI maps them onto these codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitTransport = 3,
  kExitIntegrity = 4,
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration, unusable input files, invalid CLI usage.
struct ConfigError : Error {
  using Error::Error;
};

// Remote endpoint failure that survived the retry budget.
struct TransportError : Error {
  TransportError(const std::string& what, int attempts_, int last_status_)
      : Error(what), attempts(attempts_), last_status(last_status_) {}
  int attempts = 0;
  int last_status = 0;  // HTTP status of the last attempt, 0 if no response
};

// Persisted artifacts that fail verification (hash mismatch, truncation, ...).
struct IntegrityError : Error {
  using Error::Error;
};

// An operation was invoked outside its documented contract.
struct ContractViolation : Error {
  using Error::Error;
};

}  // namespace icrl
