#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "blockflow/ddg.hpp"
#include "blockflow/engine.hpp"
#include "blockflow/lowering.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/scheduler.hpp"
#include "blockflow/timemodel.hpp"

namespace blockflow {

enum class ForceReason { ValueNeeded, ThresholdReached };
enum class NodeState { Pending, Executing, Done, Failed };

std::string_view to_string(ForceReason r) noexcept;

struct SessionConfig {
  EngineConfig engine;
  SchedulerKind scheduler = SchedulerKind::Heuristic;
  ExactOptions exact;
  std::size_t trace_threshold = 10000;
  /// Plan and execute flushed traces on background threads while
  /// recording continues. Off runs every stage in the calling thread.
  bool overlap = true;
  std::shared_ptr<const TimeModel> model;  // default_time_model() when null
  /// Keep the graphs, schedule and run report of every trace.
  bool keep_artifacts = false;
};

struct TraceArtifacts {
  Ddg ddg;
  LoweredGraph lowered;
  CostedGraph costed;
  Schedule schedule;
  RunReport report;
};

/// Per-trace measurements; timestamps are ns since the session started.
struct TraceStats {
  std::size_t index = 0;
  ForceReason reason = ForceReason::ValueNeeded;
  std::size_t ops = 0;           // recorded op nodes
  std::size_t instructions = 0;  // lowered block operations
  std::size_t edges = 0;         // instruction precedence edges
  double estimated_makespan_ns = 0;
  double measured_makespan_ns = 0;
  double lower_ns = 0;
  double schedule_ns = 0;
  double execute_ns = 0;
  double flush_at = 0;
  double plan_start = 0;
  double plan_end = 0;
  double exec_start = 0;
  double exec_end = 0;
  std::shared_ptr<const TraceArtifacts> artifacts;
};

class Session;

/// Shared reference to a recorded node. Copies share the node; the last
/// copy to go away lets the session reclaim it once nothing pending needs it.
class Handle {
 public:
  Handle() = default;
  Handle(const Handle& other);
  Handle(Handle&& other) noexcept;
  Handle& operator=(const Handle& other);
  Handle& operator=(Handle&& other) noexcept;
  ~Handle();

  bool valid() const noexcept { return session_ != nullptr; }
  NodeId id() const noexcept { return id_; }
  void reset();

 private:
  friend class Session;
  Handle(Session* s, NodeId id) : session_(s), id_(id) {}

  Session* session_ = nullptr;
  NodeId id_ = 0;
};

class Session {
 public:
  explicit Session(SessionConfig config = {});
  /// Waits for in-flight traces; errors are dropped.
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const noexcept { return config_; }

  Handle constant(Matrix m);
  /// Records an op without executing it. Throws ShapeError immediately.
  Handle apply(Opcode op, std::span<const Handle> operands,
               std::optional<double> scalar = std::nullopt);
  Handle apply(Opcode op, std::initializer_list<Handle> operands,
               std::optional<double> scalar = std::nullopt) {
    return apply(op, std::span<const Handle>(operands.begin(), operands.size()), scalar);
  }

  /// Value of the node, flushing its pending backward slice if needed and
  /// blocking until the trace holding it completes.
  std::shared_ptr<const Matrix> force(const Handle& h);

  /// Hands the whole pending trace to the pipeline without waiting.
  void flush(ForceReason reason = ForceReason::ThresholdReached);

  /// Blocks until every flushed trace finished; rethrows the first failure.
  void wait_idle();

  /// Copy-on-write update: forces h, deep-copies its value, applies `fn`
  /// and rebinds h to a new constant node holding the copy.
  void mutate(Handle& h, const std::function<void(Matrix&)>& fn);

  NodeState state(const Handle& h) const;
  Shape shape(const Handle& h) const;
  std::size_t node_count() const;     // live records
  std::size_t pending_count() const;  // recorded, not yet flushed
  bool alive(NodeId id) const;
  std::vector<NodeId> operands(NodeId id) const;
  std::vector<TraceStats> traces() const;

 private:
  friend class Handle;
  struct Record;
  struct Job;

  void retain(NodeId id);
  void release(NodeId id);
  void collect_locked(NodeId id);
  void flush_nodes(std::unique_lock<std::mutex>& lock, std::vector<NodeId> ids,
                   ForceReason reason);
  void finish(Job& job);
  void plan(Job& job);
  void execute(Job& job);
  void planner_loop();
  void executor_loop();
  double now() const;

  SessionConfig config_;
  std::shared_ptr<const TimeModel> model_;
  std::unique_ptr<Engine> engine_;
  std::chrono::steady_clock::time_point t0_;

  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::unordered_map<NodeId, std::unique_ptr<Record>> records_;
  std::vector<NodeId> pending_;
  NodeId next_id_ = 1;
  std::size_t next_trace_ = 0;
  std::size_t in_flight_ = 0;
  std::exception_ptr first_error_;
  std::vector<TraceStats> stats_;

  std::deque<std::unique_ptr<Job>> plan_queue_;
  std::deque<std::unique_ptr<Job>> exec_queue_;
  bool stopping_ = false;
  std::thread planner_;
  std::thread executor_;
};

}  // namespace blockflow
