#include "blockflow/io.hpp"

#include <stdexcept>

namespace blockflow {

Json schedule_to_json(const Schedule& s, const CostedGraph& g) {
  Json streams = Json::array();
  for (const auto& st : s.streams) {
    Json lane = Json::array();
    for (std::size_t i : st) {
      const StageTimes& c = g.cost(i);
      lane.push_back({{"id", i},
                      {"lowered", g.lowered_id(i)},
                      {"opcode", std::string(name(g.opcode(i)))},
                      {"t", s.start[i]},
                      {"df", c.df},
                      {"ex", c.ex},
                      {"wb", c.wb}});
    }
    streams.push_back(std::move(lane));
  }
  return {{"workers", s.workers},
          {"kind", std::string(to_string(s.kind))},
          {"makespan_est", s.makespan},
          {"streams", std::move(streams)}};
}

Json report_to_json(const RunReport& r) {
  Json instrs = Json::array();
  for (const InstructionRecord& rec : r.instructions) {
    instrs.push_back({{"id", rec.instruction},
                      {"lowered", rec.lowered},
                      {"opcode", std::string(name(rec.op))},
                      {"worker", rec.worker},
                      {"t_start_meas", rec.df_start},
                      {"df", rec.df()},
                      {"ex", rec.ex()},
                      {"wb", rec.wb()},
                      {"ex_start", rec.ex_start},
                      {"wb_start", rec.wb_start},
                      {"dispatch", rec.dispatch},
                      {"observed", rec.observed},
                      {"buffer_in", rec.buffer_in},
                      {"buffer_out", rec.buffer_out}});
  }
  Json idle = Json::array();
  for (std::size_t k = 0; k < r.idle.size(); ++k) {
    const WorkerIdle& w = r.idle[k];
    idle.push_back({{"worker", k},
                    {"task_ns", w.task_ns},
                    {"dma_ns", w.dma_ns},
                    {"busy_ns", w.busy_ns},
                    {"wall_ns", w.wall_ns}});
  }
  return {{"makespan_measured", r.makespan_ns},
          {"wall_ns", r.wall_ns},
          {"instructions", std::move(instrs)},
          {"idle", std::move(idle)},
          {"max_mailbox", r.max_mailbox}};
}

Json lowered_to_json(const LoweredGraph& g) {
  Json nodes = Json::array();
  for (const LoweredNode& n : g.nodes()) {
    Json j = {{"id", n.id},
              {"kind", n.is_op() ? "op" : "const"},
              {"origin", n.origin},
              {"rows", n.out_shape.rows},
              {"cols", n.out_shape.cols},
              {"valid_rows", n.valid.rows},
              {"valid_cols", n.valid.cols}};
    if (n.is_op()) {
      j["opcode"] = std::string(name(n.op));
      j["operands"] = n.operands;
      if (n.scalar) j["scalar"] = *n.scalar;
    } else {
      j["view"] = {n.view.row_start, n.view.row_count, n.view.col_start, n.view.col_count};
    }
    nodes.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  Json grids = Json::object();
  for (const auto& [origin, grid] : g.result_map()) {
    grids[std::to_string(origin)] = {{"rows", grid.logical.rows},
                                     {"cols", grid.logical.cols},
                                     {"p", grid.part.p},
                                     {"q", grid.part.q},
                                     {"k", grid.part.k},
                                     {"l", grid.part.l},
                                     {"blocks", grid.ids}};
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"result_map", std::move(grids)}};
}

Json trace_stats_to_json(const TraceStats& t) {
  return {{"trace", t.index},
          {"reason", std::string(to_string(t.reason))},
          {"ops", t.ops},
          {"instructions", t.instructions},
          {"edges", t.edges},
          {"makespan_est", t.estimated_makespan_ns},
          {"makespan_measured", t.measured_makespan_ns},
          {"lower_ns", t.lower_ns},
          {"schedule_ns", t.schedule_ns},
          {"execute_ns", t.execute_ns},
          {"flush_at", t.flush_at},
          {"plan_start", t.plan_start},
          {"plan_end", t.plan_end},
          {"exec_start", t.exec_start},
          {"exec_end", t.exec_end}};
}

namespace {

void bars_of(const Json& doc, std::size_t trace, std::vector<GanttBar>& out) {
  if (doc.contains("streams")) {
    const Json& streams = doc.at("streams");
    for (std::size_t k = 0; k < streams.size(); ++k) {
      for (const Json& e : streams[k]) {
        const double t = e.at("t"), df = e.at("df"), ex = e.at("ex"), wb = e.at("wb");
        const std::size_t id = e.at("id");
        out.push_back({trace, k, id, "df", t, t + df});
        out.push_back({trace, k, id, "ex", t + df, t + df + ex});
        out.push_back({trace, k, id, "wb", t + df + ex, t + df + ex + wb});
      }
    }
    return;
  }
  if (doc.contains("instructions")) {
    for (const Json& e : doc.at("instructions")) {
      const std::size_t k = e.at("worker"), id = e.at("id");
      const double t = e.at("t_start_meas"), df = e.at("df"), ex = e.at("ex"), wb = e.at("wb");
      const double ex0 = e.value("ex_start", t + df), wb0 = e.value("wb_start", ex0 + ex);
      out.push_back({trace, k, id, "df", t, t + df});
      out.push_back({trace, k, id, "ex", ex0, ex0 + ex});
      out.push_back({trace, k, id, "wb", wb0, wb0 + wb});
    }
    return;
  }
  throw std::invalid_argument("document is neither a schedule nor a run report");
}

}  // namespace

std::vector<GanttBar> gantt_bars(const Json& doc) {
  std::vector<GanttBar> bars;
  if (doc.is_array()) {
    for (std::size_t t = 0; t < doc.size(); ++t) bars_of(doc[t], t, bars);
  } else if (doc.is_object()) {
    bars_of(doc, 0, bars);
  } else {
    throw std::invalid_argument("expected a JSON object or array");
  }
  return bars;
}

Json gantt_to_json(const std::vector<GanttBar>& bars) {
  Json out = Json::array();
  for (const GanttBar& b : bars) {
    out.push_back({{"trace", b.trace},
                   {"worker", b.worker},
                   {"id", b.id},
                   {"stage", b.stage},
                   {"start", b.start},
                   {"end", b.end}});
  }
  return {{"bars", std::move(out)}};
}

}  // namespace blockflow
