#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blockflow/opcode.hpp"
#include "blockflow/session.hpp"

namespace blockflow {

struct Statement {
  enum class Kind { Literal, Rand, Op, Print };

  Kind kind = Kind::Literal;
  std::size_t line = 0;
  std::size_t column = 0;
  std::string target;  // bound name, or the printed name

  std::size_t rows = 0;  // Literal, Rand
  std::size_t cols = 0;
  std::vector<double> values;  // Literal, row-major

  Opcode op = Opcode::MAdd;  // Op
  std::vector<std::string> args;
  std::optional<double> scalar;
};

using Program = std::vector<Statement>;

/// Parses a trace script. Throws ParseError with the 1-based line and
/// column of syntax errors, unknown functions, wrong arity and names used
/// before they are bound.
Program parse_script(std::string_view text);

/// Row-major text of a matrix: one line per row, elements separated by
/// single spaces, each in the shortest form that reads back exactly in the
/// matrix precision.
std::string format_matrix(const Matrix& m);

struct InterpreterOptions {
  std::uint64_t seed = 0;
};

/// Records the program into `session`; PRINT forces its operand and writes
/// "NAME =" followed by the matrix rows to `out`. Waits for every flushed
/// trace before returning.
void run_program(const Program& program, Session& session, std::ostream& out,
                 const InterpreterOptions& options = {});

}  // namespace blockflow
