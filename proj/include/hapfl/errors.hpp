#pragma once

#include <stdexcept>
#include <string>

namespace hapfl {

/// User-facing configuration problem (bad file, bad key, invariant such as
/// k > K). The CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violation of an internal operation contract (caller bug). Exit code 2.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

/// Non-finite value produced where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hapfl
