#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "blockflow/engine.hpp"
#include "blockflow/lowering.hpp"
#include "blockflow/scheduler.hpp"
#include "blockflow/session.hpp"

namespace blockflow {

using Json = nlohmann::ordered_json;

/// {workers, kind, makespan_est, streams: [[{id, lowered, opcode, t, df, ex, wb}]]}
Json schedule_to_json(const Schedule& s, const CostedGraph& g);

/// {makespan_measured, wall_ns, instructions: [...], idle: [...], max_mailbox}
Json report_to_json(const RunReport& r);

/// {nodes: [...], edges: [[from, to]], result_map: {origin: grid}}
Json lowered_to_json(const LoweredGraph& g);

Json trace_stats_to_json(const TraceStats& t);

struct GanttBar {
  std::size_t trace = 0;
  std::size_t worker = 0;
  std::size_t id = 0;
  std::string stage;  // df, ex, wb
  double start = 0;
  double end = 0;
};

/// Bars from a schedule document (estimated stage spans) or a run report
/// (measured spans). Accepts one document or an array of per-trace
/// documents. Throws std::invalid_argument for anything else.
std::vector<GanttBar> gantt_bars(const Json& doc);
Json gantt_to_json(const std::vector<GanttBar>& bars);

}  // namespace blockflow
