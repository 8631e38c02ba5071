#include <algorithm>
#include <stdexcept>
#include <string>

#include "blockflow/scheduler.hpp"

namespace blockflow {

std::size_t CostedGraph::add_instruction(StageTimes cost, Opcode op, LoweredId lowered_id) {
  if (cost.df < 0 || cost.ex < 0 || cost.wb < 0) {
    throw std::invalid_argument("stage durations must be non-negative");
  }
  cost_.push_back(cost);
  op_.push_back(op);
  lowered_.push_back(lowered_id);
  succ_.emplace_back();
  pred_.emplace_back();
  return cost_.size() - 1;
}

void CostedGraph::add_edge(std::size_t i, std::size_t j) {
  if (!(i < j && j < size())) {
    throw std::invalid_argument("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") violates topological indexing");
  }
  auto& s = succ_[i];
  if (std::find(s.begin(), s.end(), j) != s.end()) return;
  s.push_back(j);
  pred_[j].push_back(i);
  ++edge_count_;
}

CostedGraph build_costed_graph(const LoweredGraph& g, const TimeModel& model) {
  CostedGraph cg;
  std::vector<std::size_t> index(g.size(), SIZE_MAX);
  for (const LoweredNode& n : g.nodes()) {
    if (!n.is_op()) continue;
    std::vector<Shape> slots;
    for (LoweredId o : n.operands) slots.push_back(g.node(o).out_shape);
    std::vector<Shape> distinct;
    for (LoweredId o : g.distinct_operands(n.id)) distinct.push_back(g.node(o).out_shape);
    StageTimes t = model.estimate_instruction(n.op, distinct, slots, n.out_shape);
    index[n.id] = cg.add_instruction(t, n.op, n.id);
  }
  for (const auto& [from, to] : g.edges()) {
    if (index[from] != SIZE_MAX && index[to] != SIZE_MAX) cg.add_edge(index[from], index[to]);
  }
  return cg;
}

std::string_view to_string(SchedulerKind k) noexcept {
  switch (k) {
    case SchedulerKind::Heuristic: return "heuristic";
    case SchedulerKind::Naive: return "naive";
    case SchedulerKind::Exact: return "exact";
  }
  return "?";
}

std::optional<SchedulerKind> parse_scheduler(std::string_view s) noexcept {
  if (s == "heuristic") return SchedulerKind::Heuristic;
  if (s == "naive") return SchedulerKind::Naive;
  if (s == "exact") return SchedulerKind::Exact;
  return std::nullopt;
}

}  // namespace blockflow
