#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "blockflow/scheduler.hpp"

namespace blockflow {

double slot(const StageTimes& c, const WorkerFront& front, double earliest) {
  double fetch_done = std::max(earliest, front.df) + c.df;
  double exec_done = std::max(fetch_done, front.ex) + c.ex;
  return std::max(exec_done, front.wb) - (c.df + c.ex);
}

namespace {

void place(Schedule& s, const CostedGraph& g, std::vector<WorkerFront>& fronts,
           std::size_t i, std::size_t k, double t) {
  const StageTimes& c = g.cost(i);
  s.start[i] = t;
  s.worker_of[i] = k;
  s.streams[k].push_back(i);
  fronts[k] = {t + c.df, t + c.df_ex(), t + c.total()};
  s.makespan = std::max(s.makespan, t + c.total());
}

Schedule empty_schedule(const CostedGraph& g, std::size_t workers, SchedulerKind kind) {
  if (workers == 0) throw std::invalid_argument("at least one worker is required");
  Schedule s;
  s.workers = workers;
  s.kind = kind;
  s.streams.assign(workers, {});
  s.start.assign(g.size(), 0.0);
  s.worker_of.assign(g.size(), 0);
  return s;
}

double operands_ready(const Schedule& s, const CostedGraph& g, std::size_t i) {
  double e = 0.0;
  for (std::size_t p : g.predecessors(i)) e = std::max(e, s.start[p] + g.cost(p).total());
  return e;
}

}  // namespace

Schedule heuristic_schedule(const CostedGraph& g, std::size_t workers, HeuristicStats* stats) {
  Schedule s = empty_schedule(g, workers, SchedulerKind::Heuristic);
  std::vector<WorkerFront> fronts(workers);
  std::vector<std::size_t> counter(g.size());
  std::vector<double> earliest(g.size(), 0.0);
  HeuristicStats local;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.size(); ++i) {
    counter[i] = g.predecessors(i).size();
    if (counter[i] == 0) {
      ready.emplace(0.0, i);
      ++local.enqueues;
    }
  }

  while (!ready.empty()) {
    const std::size_t i = ready.top().second;
    ready.pop();
    ++local.dequeues;
    const StageTimes& c = g.cost(i);

    std::size_t best = 0;
    double best_t = slot(c, fronts[0], earliest[i]);
    for (std::size_t k = 1; k < workers; ++k) {
      double t = slot(c, fronts[k], earliest[i]);
      if (t < best_t) {
        best_t = t;
        best = k;
      }
    }
    place(s, g, fronts, i, best, best_t);

    const double done = best_t + c.total();
    for (std::size_t j : g.successors(i)) {
      ++local.edge_updates;
      earliest[j] = std::max(earliest[j], done);
      if (--counter[j] == 0) {
        ready.emplace(earliest[j], j);
        ++local.enqueues;
      }
    }
  }
  if (stats) *stats = local;
  return s;
}

Schedule naive_schedule(const CostedGraph& g, std::size_t workers) {
  Schedule s = empty_schedule(g, workers, SchedulerKind::Naive);
  std::vector<WorkerFront> fronts(workers);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t k = i % workers;
    place(s, g, fronts, i, k, slot(g.cost(i), fronts[k], operands_ready(s, g, i)));
  }
  return s;
}

Schedule timed_schedule(const CostedGraph& g, std::size_t workers,
                        std::vector<std::vector<std::size_t>> streams, SchedulerKind kind) {
  Schedule s = empty_schedule(g, workers, kind);
  if (streams.size() > workers) throw std::invalid_argument("more streams than workers");
  std::vector<WorkerFront> fronts(workers);
  std::vector<std::size_t> pos(streams.size(), 0);
  std::vector<bool> placed(g.size(), false);
  std::size_t remaining = 0;
  for (const auto& st : streams) remaining += st.size();
  if (remaining != g.size()) throw std::invalid_argument("streams do not cover the graph");
  // Place stream heads whose operands are placed until everything is timed.
  while (remaining > 0) {
    bool progress = false;
    for (std::size_t k = 0; k < streams.size(); ++k) {
      while (pos[k] < streams[k].size()) {
        std::size_t i = streams[k][pos[k]];
        bool ok = !placed[i];
        for (std::size_t p : g.predecessors(i)) ok = ok && placed[p];
        if (!ok) break;
        place(s, g, fronts, i, k, slot(g.cost(i), fronts[k], operands_ready(s, g, i)));
        placed[i] = true;
        ++pos[k];
        --remaining;
        progress = true;
      }
    }
    if (!progress) throw std::invalid_argument("stream order deadlocks on precedence");
  }
  return s;
}

double critical_path(const CostedGraph& g) {
  std::vector<double> finish(g.size(), 0.0);
  double best = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double start = 0.0;
    for (std::size_t p : g.predecessors(i)) start = std::max(start, finish[p]);
    finish[i] = start + g.cost(i).total();
    best = std::max(best, finish[i]);
  }
  return best;
}

std::vector<std::string> validate(const Schedule& s, const CostedGraph& g) {
  std::vector<std::string> v;
  auto msg = [&](auto&&... parts) {
    std::ostringstream o;
    o.precision(17);
    (o << ... << parts);
    v.push_back(o.str());
  };
  auto leq = [](double a, double b) {
    return a <= b + 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
  };

  if (s.start.size() != g.size()) {
    msg("start times cover ", s.start.size(), " of ", g.size(), " instructions");
    return v;
  }
  if (s.streams.size() > s.workers) msg("schedule has more streams than workers");

  std::vector<int> seen(g.size(), 0);
  for (const auto& st : s.streams) {
    for (std::size_t i : st) {
      if (i >= g.size()) {
        msg("stream names unknown instruction ", i);
        continue;
      }
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (seen[i] != 1) msg("instruction ", i, " appears in ", seen[i], " streams");
    if (s.start[i] < 0) msg("instruction ", i, " starts before time zero");
  }

  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j : g.successors(i)) {
      if (!leq(s.start[i] + g.cost(i).total(), s.start[j])) {
        msg("precedence (", i, ", ", j, "): ", j, " starts at ", s.start[j],
            " before ", i, " completes at ", s.start[i] + g.cost(i).total());
      }
    }
  }

  for (std::size_t k = 0; k < s.streams.size(); ++k) {
    const auto& st = s.streams[k];
    for (std::size_t n = 1; n < st.size(); ++n) {
      std::size_t i = st[n - 1], j = st[n];
      if (i >= g.size() || j >= g.size()) continue;
      const StageTimes &ci = g.cost(i), &cj = g.cost(j);
      if (!leq(s.start[i] + ci.df, s.start[j])) {
        msg("worker ", k, ": fetch of ", j, " overlaps fetch of ", i);
      }
      if (!leq(s.start[i] + ci.df_ex(), s.start[j] + cj.df)) {
        msg("worker ", k, ": execute of ", j, " overlaps execute of ", i);
      }
      if (!leq(s.start[i] + ci.total(), s.start[j] + cj.df_ex())) {
        msg("worker ", k, ": write back of ", j, " overlaps write back of ", i);
      }
    }
  }

  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) z = std::max(z, s.start[i] + g.cost(i).total());
  if (!(leq(z, s.makespan) && leq(s.makespan, z))) {
    msg("makespan ", s.makespan, " differs from last completion ", z);
  }
  return v;
}

}  // namespace blockflow
