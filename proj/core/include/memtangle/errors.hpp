#pragma once

#include <stdexcept>
#include <string>

namespace memtangle {

// Exit-code contract: 0 success, 2 config/validation, 3 data/dimension,
// 4 numeric, 5 incomplete input.
class Error : public std::runtime_error {
 public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

// Bad configuration values, invalid arguments, failed validation.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

// Malformed files, dangling references, dimension mismatches,
// degenerate inputs (constant vectors, zero norms).
class DataError : public Error {
 public:
  explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};

// Non-finite intermediates, singular solves.
class NumericError : public Error {
 public:
  explicit NumericError(std::string msg) : Error(std::move(msg), 4) {}
};

// Missing cells in an evaluation grid, partial run sets.
class IncompleteInputError : public Error {
 public:
  explicit IncompleteInputError(std::string msg) : Error(std::move(msg), 5) {}
};

}  // namespace memtangle
