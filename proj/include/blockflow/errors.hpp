#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blockflow {

/// Operand dimensions do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A broken internal invariant. Never expected in a correct build.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class EngineError : public std::runtime_error {
 public:
  EngineError(const std::string& what, std::size_t instruction)
      : std::runtime_error(what), instruction_(instruction) {}

  std::size_t instruction() const noexcept { return instruction_; }

 private:
  std::size_t instruction_;
};

/// Least-squares design matrix without full column rank.
class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance too large for the exact scheduler without an explicit budget.
class SizeCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blockflow
