#include <algorithm>
#include <limits>
#include <string>

#include "blockflow/errors.hpp"
#include "blockflow/scheduler.hpp"

namespace blockflow {

namespace {

// Depth-first search over insertions in non-decreasing start order. Every
// schedule with earliest start times for its stream sequences is reachable
// that way, and those dominate all others.
class BranchAndBound {
 public:
  BranchAndBound(const CostedGraph& g, std::size_t workers, std::optional<std::uint64_t> budget)
      : g_(g),
        workers_(std::min(workers, std::max<std::size_t>(g.size(), 1))),
        budget_(budget),
        start_(g.size(), 0.0),
        placed_(g.size(), false),
        remaining_preds_(g.size()),
        fronts_(workers_),
        streams_(workers_),
        tail_(g.size(), 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) remaining_preds_[i] = g.predecessors(i).size();
    for (std::size_t i = g.size(); i-- > 0;) {
      double t = 0.0;
      for (std::size_t j : g.successors(i)) t = std::max(t, tail_[j]);
      tail_[i] = t + g.cost(i).total();
    }
  }

  void run(double upper) {
    best_ = upper;
    search(0, 0, 0.0, 0.0);
  }

  bool found() const { return found_; }
  bool exhausted() const { return !aborted_; }
  std::uint64_t nodes() const { return nodes_; }
  const std::vector<std::vector<std::size_t>>& best_streams() const { return best_streams_; }

 private:
  double ready_time(std::size_t i) const {
    double e = 0.0;
    for (std::size_t p : g_.predecessors(i)) e = std::max(e, start_[p] + g_.cost(p).total());
    return e;
  }

  double lower_bound(double makespan, double last_t) const {
    // Heads clipped at last_t: later insertions cannot start earlier.
    double lb = makespan;
    std::vector<double> head(g_.size(), 0.0);
    for (std::size_t i = 0; i < g_.size(); ++i) {
      if (placed_[i]) continue;
      double h = last_t;
      for (std::size_t p : g_.predecessors(i)) {
        double done = placed_[p] ? start_[p] + g_.cost(p).total() : head[p] + g_.cost(p).total();
        h = std::max(h, done);
      }
      head[i] = h;
      lb = std::max(lb, h + tail_[i]);
    }
    return lb;
  }

  void search(std::size_t depth, std::size_t used, double last_t, double makespan) {
    if (aborted_) return;
    if (budget_ && nodes_ >= *budget_) {
      aborted_ = true;
      return;
    }
    ++nodes_;
    if (depth == g_.size()) {
      if (makespan < best_) {
        best_ = makespan;
        best_streams_ = streams_;
        found_ = true;
      }
      return;
    }
    if (lower_bound(makespan, last_t) >= best_) return;

    for (std::size_t i = 0; i < g_.size(); ++i) {
      if (placed_[i] || remaining_preds_[i] != 0) continue;
      const StageTimes& c = g_.cost(i);
      const double e = ready_time(i);
      const std::size_t choices = std::min(used + 1, workers_);
      for (std::size_t k = 0; k < choices; ++k) {
        const double t = slot(c, fronts_[k], e);
        if (t < last_t) continue;
        const double z = std::max(makespan, t + c.total());
        if (z >= best_) continue;

        const WorkerFront saved = fronts_[k];
        fronts_[k] = {t + c.df, t + c.df_ex(), t + c.total()};
        streams_[k].push_back(i);
        start_[i] = t;
        placed_[i] = true;
        for (std::size_t j : g_.successors(i)) --remaining_preds_[j];

        search(depth + 1, std::max(used, k + 1), t, z);

        for (std::size_t j : g_.successors(i)) ++remaining_preds_[j];
        placed_[i] = false;
        streams_[k].pop_back();
        fronts_[k] = saved;
        if (aborted_) return;
      }
    }
  }

  const CostedGraph& g_;
  std::size_t workers_;
  std::optional<std::uint64_t> budget_;
  std::vector<double> start_;
  std::vector<bool> placed_;
  std::vector<std::size_t> remaining_preds_;
  std::vector<WorkerFront> fronts_;
  std::vector<std::vector<std::size_t>> streams_;
  std::vector<double> tail_;
  std::vector<std::vector<std::size_t>> best_streams_;
  double best_ = std::numeric_limits<double>::infinity();
  std::uint64_t nodes_ = 0;
  bool found_ = false;
  bool aborted_ = false;
};

}  // namespace

ExactResult exact_schedule(const CostedGraph& g, std::size_t workers,
                           const ExactOptions& options) {
  if (workers == 0) throw std::invalid_argument("at least one worker is required");
  if (!options.node_budget &&
      (g.size() > options.max_instructions || workers > options.max_workers)) {
    throw SizeCapError("exact scheduler is capped at " +
                       std::to_string(options.max_instructions) + " instructions and " +
                       std::to_string(options.max_workers) + " workers (got " +
                       std::to_string(g.size()) + " and " + std::to_string(workers) +
                       "); set a node budget to search larger instances");
  }

  Schedule incumbent = heuristic_schedule(g, workers);
  incumbent.kind = SchedulerKind::Exact;

  BranchAndBound bb(g, workers, options.node_budget);
  bb.run(incumbent.makespan);

  ExactResult r;
  r.nodes_explored = bb.nodes();
  r.optimal = bb.exhausted();
  if (bb.found()) {
    auto streams = bb.best_streams();
    streams.resize(workers);
    r.schedule = timed_schedule(g, workers, std::move(streams), SchedulerKind::Exact);
  } else {
    r.schedule = std::move(incumbent);
  }
  return r;
}

}  // namespace blockflow
