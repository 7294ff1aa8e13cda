#pragma once

#include <stdexcept>
#include <string>

namespace flexjm {

// Error taxonomy. The CLI maps these to exit codes: configuration 1,
// data 2, numerical 3. Anything else escaping to main is a bug.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// A coefficient block whose curvature cannot be made negative definite even
// after ridge escalation. posterior_mode catches this and restarts with a
// perturbed seed; if restarts are exhausted it is rethrown as FitFailure.
class NonConcaveBlock : public NumericalError {
 public:
  NonConcaveBlock(const std::string& block, const std::string& msg)
      : NumericalError("block '" + block + "': " + msg), block_(block) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

class FitFailure : public NumericalError {
 public:
  explicit FitFailure(const std::string& msg) : NumericalError(msg) {}
};

enum ExitCode {
  exit_ok = 0,
  exit_config = 1,
  exit_data = 2,
  exit_numeric = 3,
};

}  // namespace flexjm
