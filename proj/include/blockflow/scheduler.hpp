#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blockflow/lowering.hpp"
#include "blockflow/opcode.hpp"
#include "blockflow/timemodel.hpp"

namespace blockflow {

/// Instructions with estimated stage durations and precedence edges.
/// Indices are a topological order: every edge (i, j) has i < j.
class CostedGraph {
 public:
  std::size_t add_instruction(StageTimes cost, Opcode op = Opcode::MAdd,
                              LoweredId lowered_id = 0);
  /// Throws std::invalid_argument unless i < j < size(). Duplicates are ignored.
  void add_edge(std::size_t i, std::size_t j);

  std::size_t size() const noexcept { return cost_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const StageTimes& cost(std::size_t i) const { return cost_[i]; }
  Opcode opcode(std::size_t i) const { return op_[i]; }
  LoweredId lowered_id(std::size_t i) const { return lowered_[i]; }
  const std::vector<std::size_t>& successors(std::size_t i) const { return succ_[i]; }
  const std::vector<std::size_t>& predecessors(std::size_t i) const { return pred_[i]; }

 private:
  std::vector<StageTimes> cost_;
  std::vector<Opcode> op_;
  std::vector<LoweredId> lowered_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
  std::size_t edge_count_ = 0;
};

/// Block operations of a lowered graph costed by the time model. Constant
/// blocks are already in memory and are not scheduled.
CostedGraph build_costed_graph(const LoweredGraph& g, const TimeModel& model);

enum class SchedulerKind { Heuristic, Naive, Exact };

std::string_view to_string(SchedulerKind k) noexcept;
std::optional<SchedulerKind> parse_scheduler(std::string_view s) noexcept;

struct Schedule {
  std::size_t workers = 0;
  SchedulerKind kind = SchedulerKind::Heuristic;
  std::vector<std::vector<std::size_t>> streams;  // instruction indices per worker
  std::vector<double> start;                      // t_i
  std::vector<std::size_t> worker_of;
  double makespan = 0.0;
};

/// Completion times of the last instruction's stages on one worker.
struct WorkerFront {
  double df = 0.0;
  double ex = 0.0;
  double wb = 0.0;
};

/// Earliest start of an instruction with stage costs `c` on a worker whose
/// stages finish at `front`, given operands complete at `earliest`.
double slot(const StageTimes& c, const WorkerFront& front, double earliest);

struct HeuristicStats {
  std::size_t enqueues = 0;
  std::size_t dequeues = 0;
  std::size_t edge_updates = 0;
};

/// List scheduler: the ready instruction with the earliest operand
/// completion goes to the worker where it can start first. Ties go to the
/// lower instruction index, then the lower worker index.
Schedule heuristic_schedule(const CostedGraph& g, std::size_t workers,
                            HeuristicStats* stats = nullptr);

/// Round-robin over index order; start times from the same slot recurrence.
Schedule naive_schedule(const CostedGraph& g, std::size_t workers);

struct ExactOptions {
  std::size_t max_instructions = 10;
  std::size_t max_workers = 3;
  std::optional<std::uint64_t> node_budget;  // search nodes; lifts the size cap
};

struct ExactResult {
  Schedule schedule;
  bool optimal = false;
  std::uint64_t nodes_explored = 0;
};

/// Depth-first branch and bound over stream assignments. Throws
/// SizeCapError when the instance exceeds the caps and no budget is set.
ExactResult exact_schedule(const CostedGraph& g, std::size_t workers,
                           const ExactOptions& options = {});

/// CPLEX-LP text of the makespan integer program with a synthetic start
/// node `s`; instruction i is named by its 1-based position.
std::string emit_ilp(const CostedGraph& g, std::size_t workers);

/// Precedence, stream succession, partition and makespan violations.
std::vector<std::string> validate(const Schedule& s, const CostedGraph& g);

/// Longest path of total stage durations; a lower bound on any makespan.
double critical_path(const CostedGraph& g);

/// Start times and makespan for fixed stream sequences (earliest start
/// under the slot recurrence). Sequences must respect precedence order.
Schedule timed_schedule(const CostedGraph& g, std::size_t workers,
                        std::vector<std::vector<std::size_t>> streams, SchedulerKind kind);

}  // namespace blockflow
