#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Layout mismatch, unknown layer, wrong dimensions.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A NaN or Inf appeared where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite state; carries the round where it happened.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int round, const std::string& what)
      : std::runtime_error("diverged at round " + std::to_string(round) + ": " + what),
        round_(round) {}
  int round() const noexcept { return round_; }

 private:
  int round_;
};

// Invalid experiment configuration. `path` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Malformed input file; row and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, std::size_t col, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ", column " + std::to_string(col) + ": " +
                           what),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace fedsim
