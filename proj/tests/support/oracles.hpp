#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "blockflow/dsl.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/scheduler.hpp"
#include "blockflow/timemodel.hpp"

namespace blockflow::testing {

struct FuzzOptions {
  std::size_t max_dim = 300;
  std::size_t ops = 12;
  double intermediate_print = 0.2;  // chance of a PRINT right after an op
};

/// Script text plus the statements it was generated from, so the oracle
/// never goes through the parser.
struct FuzzProgram {
  std::string script;
  Program steps;
};

/// Random program over every opcode. Operations whose results are not
/// Lipschitz in their inputs (division, powers, rounding, comparisons,
/// trig) only see operands without product ancestry, which the engine
/// reproduces bit for bit; products never see division or power results.
FuzzProgram fuzz_program(std::uint64_t seed, const FuzzOptions& options = {});

struct Printed {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
};

/// Eager dense evaluation with reference_eval; RAND draws follow the
/// interpreter contract (mt19937_64, (x >> 11) * 2^-53, row-major).
std::vector<Printed> eager_run(const Program& steps, Precision precision,
                               std::size_t divisor, std::uint64_t seed);

/// Reads back "NAME =" blocks written by PRINT. Values are parsed in the
/// given precision and widened, so shortest text round-trips exactly.
std::vector<Printed> parse_printed(std::string_view text, Precision precision);

/// Non-finite cells must agree exactly; finite cells within
/// max|x - y| <= tol * max(max|ref|, tiny). Returns a description of the
/// first mismatch.
std::optional<std::string> compare_close(const Printed& ref, const Printed& got,
                                         double tol);

/// max|ref - got| / max(max|ref|, tiny) over the logical elements.
double max_norm_error(const Matrix& ref, const Matrix& got);

/// Known coefficients for every class, keyed like TimeModel: "transfer"
/// with df and wb, each opcode name with ex.
std::map<std::string, std::map<Stage, std::vector<double>>> synthetic_truth();

/// Samples over the sweep {4, 20, ..., 96} (pairs for transfers and
/// element-wise ops, triples for products), `reps` per size, durations
/// multiplied by (1 + noise * N(0, 1)). Terms are spelled out here rather
/// than taken from basis().
std::vector<ProfileSample> synthetic_samples(double noise, std::uint64_t seed,
                                             std::size_t reps = 3);

/// Random DAG in index order: edge (i, j) with probability edge_prob,
/// integer stage durations in [1, max_cost].
CostedGraph random_costed_graph(std::mt19937_64& rng, std::size_t n, double edge_prob,
                                int max_cost = 10);

/// Layered DAG with exactly `edges` distinct edges between adjacent layers.
CostedGraph layered_dag(std::mt19937_64& rng, std::size_t nodes, std::size_t edges,
                        std::size_t width);

/// Feasibility re-derived from the integer program's constraints: every
/// instruction on exactly one stream, precedence, the three stage
/// succession rows between stream neighbours, and the makespan row.
std::size_t count_violations(const Schedule& s, const CostedGraph& g, double eps = 1e-9);

/// Longest path of total durations by dynamic programming in index order.
double longest_path(const CostedGraph& g);

/// Optimal makespan by enumerating every worker assignment and every
/// stream order, with start times from longest paths in the constraint
/// graph of the integer program. Feasible for n <= 7.
double brute_force_makespan(const CostedGraph& g, std::size_t workers);

}  // namespace blockflow::testing
