#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "blockflow/lowering.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/precision.hpp"
#include "blockflow/scheduler.hpp"

namespace blockflow {

struct EngineConfig {
  std::size_t workers = 1;
  std::size_t buffer_elems = 9216;
  std::size_t divisor = 4;
  Precision precision = Precision::Single;
  std::size_t mailbox_capacity = 4;
  /// Control loop spins with yield instead of sleeping on the board.
  bool instrumented = false;
  /// At most one instruction in flight across all workers (profiling).
  bool isolate_ops = false;
  /// Makes the kernel of this instruction index throw (failure-path tests).
  std::optional<std::size_t> inject_fault_at;
};

/// Timestamps in nanoseconds since the start of the run.
struct InstructionRecord {
  std::size_t instruction = 0;
  LoweredId lowered = 0;
  Opcode op = Opcode::MAdd;
  std::size_t worker = 0;
  double dispatch = 0;   // pushed into the mailbox
  double received = 0;   // taken out of the mailbox by the worker
  double df_issue = 0;
  double df_start = 0;
  double df_end = 0;
  double ex_start = 0;
  double ex_end = 0;
  double wb_issue = 0;
  double wb_start = 0;
  double wb_end = 0;
  double observed = 0;   // completion seen by the control loop
  double df_operand_ns[2] = {0, 0};  // per distinct operand block
  unsigned buffer_in = 0;
  unsigned buffer_out = 0;

  double df() const noexcept { return df_end - df_start; }
  double ex() const noexcept { return ex_end - ex_start; }
  double wb() const noexcept { return wb_end - wb_start; }
};

struct WorkerIdle {
  double task_ns = 0;  // blocked on an empty mailbox
  double dma_ns = 0;   // blocked on a pending transfer
  double busy_ns = 0;  // executing kernels
  double wall_ns = 0;
};

struct RunReport {
  std::vector<InstructionRecord> instructions;  // indexed by costed instruction
  std::vector<WorkerIdle> idle;
  std::vector<std::size_t> max_mailbox;  // peak unexecuted occupancy per worker
  double makespan_ns = 0;  // run start to last write-back completion
  double wall_ns = 0;      // run start to quiescence
};

using ConstantMap = std::unordered_map<NodeId, std::shared_ptr<const Matrix>>;

struct EngineResult {
  std::map<NodeId, Matrix> values;
  RunReport report;
};

/// Persistent pool of p workers, each paired with a transfer agent that
/// performs its staging copies in issue order. One run at a time.
class Engine {
 public:
  explicit Engine(EngineConfig config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const noexcept { return config_; }

  /// Executes the scheduled block instructions. `constants` supplies the
  /// matrices behind every ConstBlock origin; `outputs` selects which op
  /// origins are assembled (all when empty). Throws EngineError naming the
  /// failing instruction when a kernel fails.
  EngineResult run(const LoweredGraph& lg, const CostedGraph& cg, const Schedule& schedule,
                   const ConstantMap& constants, std::span<const NodeId> outputs = {});

  struct Impl;

 private:
  EngineConfig config_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace blockflow
