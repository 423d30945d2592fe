#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace offroad {

// Error taxonomy. The CLI maps each category onto a stable exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unusable or malformed input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// No feasible candidate or no guidance available (exit code 4).
class BlockedError : public Error {
 public:
  using Error::Error;
};

// Non-fatal messages collected along a computation.
struct Diagnostics {
  std::vector<std::string> messages;

  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const { return messages.empty(); }
};

inline void note(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) diag->add(std::move(msg));
}

}  // namespace offroad
