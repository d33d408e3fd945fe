#pragma once

#include <stdexcept>
#include <string>

namespace cpl {

// Error taxonomy maps onto CLI exit codes: config 2, invariant 3, I/O 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation requires hidden ground truths but the dataset is not in oracle mode.
class OracleError : public ConfigError {
 public:
  explicit OracleError(const std::string& msg) : ConfigError(msg) {}
};

// Feature/class dimension mismatch between a model and its input.
class DimensionError : public ConfigError {
 public:
  explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a NaN loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// A validity guarantee that must hold on a run was violated.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cpl
