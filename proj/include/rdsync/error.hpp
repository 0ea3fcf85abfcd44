#pragma once

#include <stdexcept>
#include <string>

namespace rdsync {

// Base of all toolkit errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, unknown kind, dimension mismatch.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : Error(key_path.empty() ? what : key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

// Violated precondition on an argument (not config related).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite input/output, overflow, explosion, non-integrable density.
class NumericRangeError : public Error {
 public:
  using Error::Error;
};

// Time outside a noise window, or not aligned with the grid.
class WindowError : public Error {
 public:
  using Error::Error;
};

// Newton divergence, QR breakdown, eigen-solver failure, quadrature refinement mismatch.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, long step = -1)
      : Error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace rdsync
