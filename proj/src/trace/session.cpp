#include "blockflow/session.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "blockflow/errors.hpp"
#include "blockflow/reference.hpp"

namespace blockflow {

std::string_view to_string(ForceReason r) noexcept {
  return r == ForceReason::ValueNeeded ? "value-needed" : "threshold";
}

struct Session::Record {
  DdgNode node;
  NodeState state = NodeState::Pending;
  std::shared_ptr<const Matrix> value;
  std::size_t refs = 0;
  std::size_t pending_consumers = 0;  // consumers not yet Done, counted once each
  std::exception_ptr error;
};

struct Session::Job {
  std::size_t index = 0;
  ForceReason reason = ForceReason::ValueNeeded;
  std::vector<NodeId> ids;       // flushed op nodes, ascending
  std::vector<NodeId> outputs;   // values kept after the run
  std::vector<NodeId> external;  // operands from outside the trace
  Ddg ddg;
  LoweredGraph lowered;
  CostedGraph costed;
  Schedule schedule;
  RunReport report;
  std::map<NodeId, Matrix> values;
  std::exception_ptr error;
  TraceStats stats;
};

namespace {

std::vector<NodeId> distinct(const std::vector<NodeId>& v) {
  std::vector<NodeId> out;
  for (NodeId x : v) {
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  }
  return out;
}

}  // namespace

// Handle

Handle::Handle(const Handle& other) : session_(other.session_), id_(other.id_) {
  if (session_) session_->retain(id_);
}

Handle::Handle(Handle&& other) noexcept : session_(other.session_), id_(other.id_) {
  other.session_ = nullptr;
}

Handle& Handle::operator=(const Handle& other) {
  if (this == &other) return *this;
  if (other.session_) other.session_->retain(other.id_);
  reset();
  session_ = other.session_;
  id_ = other.id_;
  return *this;
}

Handle& Handle::operator=(Handle&& other) noexcept {
  if (this == &other) return *this;
  reset();
  session_ = other.session_;
  id_ = other.id_;
  other.session_ = nullptr;
  return *this;
}

Handle::~Handle() { reset(); }

void Handle::reset() {
  if (session_) session_->release(id_);
  session_ = nullptr;
}

// Session

Session::Session(SessionConfig config)
    : config_(std::move(config)),
      model_(config_.model ? config_.model
                           : std::shared_ptr<const TimeModel>(&default_time_model(),
                                                              [](const TimeModel*) {})),
      engine_(std::make_unique<Engine>(config_.engine)),
      t0_(std::chrono::steady_clock::now()) {
  if (config_.trace_threshold == 0) throw std::invalid_argument("trace threshold must be >= 1");
  if (config_.overlap) {
    planner_ = std::thread([this] { planner_loop(); });
    executor_ = std::thread([this] { executor_loop(); });
  }
}

Session::~Session() {
  {
    std::unique_lock lock(mutex_);
    changed_.wait(lock, [&] { return in_flight_ == 0; });
    stopping_ = true;
  }
  changed_.notify_all();
  if (planner_.joinable()) planner_.join();
  if (executor_.joinable()) executor_.join();
}

double Session::now() const {
  return std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0_)
      .count();
}

void Session::retain(NodeId id) {
  std::lock_guard lock(mutex_);
  records_.at(id)->refs++;
}

void Session::release(NodeId id) {
  std::lock_guard lock(mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) return;
  it->second->refs--;
  collect_locked(id);
}

void Session::collect_locked(NodeId id) {
  auto it = records_.find(id);
  if (it == records_.end()) return;
  const Record& r = *it->second;
  const bool finished = r.state == NodeState::Done || r.state == NodeState::Failed;
  if (finished && r.refs == 0 && r.pending_consumers == 0) records_.erase(it);
}

Handle Session::constant(Matrix m) {
  if (m.precision() != config_.engine.precision || m.divisor() != config_.engine.divisor) {
    throw std::invalid_argument("matrix precision or divisor differs from the session's");
  }
  std::lock_guard lock(mutex_);
  auto rec = std::make_unique<Record>();
  rec->node.id = next_id_++;
  rec->node.kind = DdgNode::Kind::Constant;
  rec->node.shape = m.shape();
  rec->state = NodeState::Done;
  rec->value = std::make_shared<const Matrix>(std::move(m));
  rec->refs = 1;
  const NodeId id = rec->node.id;
  records_.emplace(id, std::move(rec));
  return Handle(this, id);
}

Handle Session::apply(Opcode op, std::span<const Handle> operands,
                      std::optional<double> scalar) {
  std::unique_lock lock(mutex_);
  std::vector<Shape> shapes;
  std::vector<NodeId> ids;
  for (const Handle& h : operands) {
    if (h.session_ != this) throw std::invalid_argument("operand handle from another session");
    shapes.push_back(records_.at(h.id_)->node.shape);
    ids.push_back(h.id_);
  }
  Shape shape = result_shape(op, shapes);
  if (has_scalar(op) != scalar.has_value()) {
    throw ShapeError(std::string(name(op)) +
                     (scalar ? " takes no scalar parameter" : " requires a scalar parameter"));
  }
  auto rec = std::make_unique<Record>();
  rec->node.id = next_id_++;
  rec->node.kind = DdgNode::Kind::Op;
  rec->node.op = op;
  rec->node.operands = ids;
  rec->node.scalar = scalar;
  rec->node.shape = shape;
  rec->refs = 1;
  const NodeId id = rec->node.id;
  for (NodeId o : distinct(ids)) records_.at(o)->pending_consumers++;
  records_.emplace(id, std::move(rec));
  pending_.push_back(id);

  if (pending_.size() >= config_.trace_threshold) {
    flush_nodes(lock, pending_, ForceReason::ThresholdReached);
  }
  return Handle(this, id);
}

void Session::flush(ForceReason reason) {
  std::unique_lock lock(mutex_);
  if (!pending_.empty()) flush_nodes(lock, pending_, reason);
}

void Session::flush_nodes(std::unique_lock<std::mutex>& lock, std::vector<NodeId> ids,
                          ForceReason reason) {
  std::sort(ids.begin(), ids.end());
  auto job = std::make_unique<Job>();
  job->index = next_trace_++;
  job->reason = reason;
  job->ids = ids;

  const std::set<NodeId> in_trace(ids.begin(), ids.end());
  std::set<NodeId> external, outputs;
  for (NodeId id : ids) {
    const Record& r = *records_.at(id);
    for (NodeId o : r.node.operands) {
      if (!in_trace.count(o)) external.insert(o);
    }
    if (r.refs > 0) outputs.insert(id);
  }
  std::vector<NodeId> remaining;
  for (NodeId id : pending_) {
    if (in_trace.count(id)) continue;
    remaining.push_back(id);
    for (NodeId o : records_.at(id)->node.operands) {
      if (in_trace.count(o)) outputs.insert(o);
    }
  }
  pending_ = std::move(remaining);

  for (NodeId e : external) job->ddg.add_constant(e, records_.at(e)->node.shape);
  for (NodeId id : ids) {
    Record& r = *records_.at(id);
    job->ddg.add_op(id, r.node.op, r.node.operands, r.node.scalar);
    r.state = NodeState::Executing;
  }
  job->external.assign(external.begin(), external.end());
  job->outputs.assign(outputs.begin(), outputs.end());
  job->stats.index = job->index;
  job->stats.reason = reason;
  job->stats.ops = ids.size();
  job->stats.flush_at = now();
  ++in_flight_;

  if (config_.overlap) {
    plan_queue_.push_back(std::move(job));
    changed_.notify_all();
    return;
  }
  lock.unlock();
  plan(*job);
  execute(*job);
  lock.lock();
  finish(*job);
}

void Session::plan(Job& job) {
  job.stats.plan_start = now();
  if (job.error) return;
  try {
    const std::size_t delta = config_.engine.divisor, S = config_.engine.buffer_elems;
    const std::size_t p = config_.engine.workers;
    auto t = now();
    job.lowered = lower_graph(job.ddg, delta, S);
    job.costed = build_costed_graph(job.lowered, *model_);
    job.stats.lower_ns = now() - t;
    t = now();
    switch (config_.scheduler) {
      case SchedulerKind::Heuristic: job.schedule = heuristic_schedule(job.costed, p); break;
      case SchedulerKind::Naive: job.schedule = naive_schedule(job.costed, p); break;
      case SchedulerKind::Exact:
        job.schedule = exact_schedule(job.costed, p, config_.exact).schedule;
        break;
    }
    job.stats.schedule_ns = now() - t;
    job.stats.instructions = job.costed.size();
    job.stats.edges = job.costed.edge_count();
    job.stats.estimated_makespan_ns = job.schedule.makespan;
  } catch (...) {
    job.error = std::current_exception();
  }
  job.stats.plan_end = now();
}

void Session::execute(Job& job) {
  job.stats.exec_start = now();
  if (!job.error) {
    try {
      ConstantMap constants;
      {
        std::lock_guard lock(mutex_);
        for (NodeId e : job.external) {
          const Record& r = *records_.at(e);
          if (r.state == NodeState::Failed && r.error) std::rethrow_exception(r.error);
          if (!r.value) throw InvariantError("operand " + std::to_string(e) + " has no value");
          constants.emplace(e, r.value);
        }
      }
      auto t = now();
      EngineResult result = engine_->run(job.lowered, job.costed, job.schedule, constants,
                                         job.outputs);
      job.stats.execute_ns = now() - t;
      job.stats.measured_makespan_ns = result.report.makespan_ns;
      job.values = std::move(result.values);
      job.report = std::move(result.report);
    } catch (...) {
      job.error = std::current_exception();
    }
  }
  job.stats.exec_end = now();
  if (config_.keep_artifacts) {
    auto a = std::make_shared<TraceArtifacts>();
    a->ddg = std::move(job.ddg);
    a->lowered = std::move(job.lowered);
    a->costed = std::move(job.costed);
    a->schedule = std::move(job.schedule);
    a->report = std::move(job.report);
    job.stats.artifacts = std::move(a);
  }
}

// Called with mutex_ held.
void Session::finish(Job& job) {
  for (NodeId id : job.ids) {
    Record& r = *records_.at(id);
    if (job.error) {
      r.state = NodeState::Failed;
      r.error = job.error;
    } else {
      r.state = NodeState::Done;
      auto v = job.values.find(id);
      if (v != job.values.end()) r.value = std::make_shared<const Matrix>(std::move(v->second));
    }
  }
  for (NodeId id : job.ids) {
    for (NodeId o : distinct(records_.at(id)->node.operands)) {
      records_.at(o)->pending_consumers--;
      collect_locked(o);
    }
  }
  for (NodeId id : job.ids) collect_locked(id);
  if (job.error && !first_error_) first_error_ = job.error;
  stats_.push_back(std::move(job.stats));
  --in_flight_;
  changed_.notify_all();
}

void Session::planner_loop() {
  for (;;) {
    std::unique_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !plan_queue_.empty(); });
      if (plan_queue_.empty()) return;
      job = std::move(plan_queue_.front());
      plan_queue_.pop_front();
    }
    plan(*job);
    {
      std::lock_guard lock(mutex_);
      exec_queue_.push_back(std::move(job));
    }
    changed_.notify_all();
  }
}

void Session::executor_loop() {
  for (;;) {
    std::unique_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !exec_queue_.empty(); });
      if (exec_queue_.empty()) return;
      job = std::move(exec_queue_.front());
      exec_queue_.pop_front();
    }
    execute(*job);
    std::lock_guard lock(mutex_);
    finish(*job);
  }
}

std::shared_ptr<const Matrix> Session::force(const Handle& h) {
  if (h.session_ != this) throw std::invalid_argument("handle from another session");
  std::unique_lock lock(mutex_);
  Record* r = records_.at(h.id_).get();
  if (r->state == NodeState::Pending) {
    std::vector<NodeId> slice, stack{h.id_};
    std::set<NodeId> seen{h.id_};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      slice.push_back(id);
      for (NodeId o : records_.at(id)->node.operands) {
        if (records_.at(o)->state == NodeState::Pending && seen.insert(o).second) {
          stack.push_back(o);
        }
      }
    }
    flush_nodes(lock, std::move(slice), ForceReason::ValueNeeded);
    r = records_.at(h.id_).get();
  }
  changed_.wait(lock, [&] {
    return r->state == NodeState::Done || r->state == NodeState::Failed;
  });
  if (r->state == NodeState::Failed) std::rethrow_exception(r->error);
  if (!r->value) throw InvariantError("forced node " + std::to_string(h.id_) + " has no value");
  return r->value;
}

void Session::wait_idle() {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [&] { return in_flight_ == 0; });
  if (first_error_) {
    auto e = first_error_;
    first_error_ = nullptr;
    std::rethrow_exception(e);
  }
}

void Session::mutate(Handle& h, const std::function<void(Matrix&)>& fn) {
  Matrix copy = *force(h);
  fn(copy);
  h = constant(std::move(copy));
}

NodeState Session::state(const Handle& h) const {
  std::lock_guard lock(mutex_);
  return records_.at(h.id_)->state;
}

Shape Session::shape(const Handle& h) const {
  std::lock_guard lock(mutex_);
  return records_.at(h.id_)->node.shape;
}

std::size_t Session::node_count() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::size_t Session::pending_count() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

bool Session::alive(NodeId id) const {
  std::lock_guard lock(mutex_);
  return records_.count(id) != 0;
}

std::vector<NodeId> Session::operands(NodeId id) const {
  std::lock_guard lock(mutex_);
  return records_.at(id)->node.operands;
}

std::vector<TraceStats> Session::traces() const {
  std::lock_guard lock(mutex_);
  auto out = stats_;
  std::sort(out.begin(), out.end(),
            [](const TraceStats& a, const TraceStats& b) { return a.index < b.index; });
  return out;
}

}  // namespace blockflow
