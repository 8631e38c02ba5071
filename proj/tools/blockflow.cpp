// blockflow: run trace scripts on the block engine, calibrate the time
// model, compare schedulers and export schedules, Gantt data and ILPs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "blockflow/dsl.hpp"
#include "blockflow/errors.hpp"
#include "blockflow/io.hpp"
#include "blockflow/numfmt.hpp"
#include "blockflow/profile.hpp"
#include "blockflow/session.hpp"
#include "blockflow/stats.hpp"
#include "blockflow/workloads.hpp"

namespace bf = blockflow;

namespace {

constexpr int kExitParse = 1;
constexpr int kExitShape = 2;
constexpr int kExitEngine = 3;
constexpr int kExitIo = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::size_t workers = 0;  // 0: BLOCKFLOW_WORKERS, else hardware threads capped at 4
  std::size_t buffer_elems = 9216;
  std::size_t divisor = 4;
  std::string precision = "single";
  std::string scheduler = "heuristic";
  std::size_t trace_threshold = 10000;
  std::uint64_t seed = 0;
  std::string coeffs;
  std::string overlap = "on";
  std::string report;
  std::string schedule;
  std::uint64_t exact_budget = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("error writing " + path);
}

std::size_t resolve_workers(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("BLOCKFLOW_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
    throw std::invalid_argument(std::string("BLOCKFLOW_WORKERS is not a positive integer: ") + env);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(hw, 1, 4);
}

void add_engine_flags(CLI::App* app, Options& o) {
  app->add_option("--workers", o.workers, "worker count (env BLOCKFLOW_WORKERS)");
  app->add_option("--buffer-elems", o.buffer_elems, "staging buffer capacity S in elements");
  app->add_option("--divisor", o.divisor, "block dimension divisor");
  app->add_option("--precision", o.precision, "element precision")
      ->check(CLI::IsMember({"single", "double"}));
}

void add_run_flags(CLI::App* app, Options& o) {
  add_engine_flags(app, o);
  app->add_option("--scheduler", o.scheduler, "scheduling algorithm")
      ->check(CLI::IsMember({"heuristic", "naive", "exact"}));
  app->add_option("--exact-budget", o.exact_budget,
                  "search node budget for the exact scheduler (lifts its size cap)");
  app->add_option("--trace-threshold", o.trace_threshold, "pending ops that force a flush");
  app->add_option("--seed", o.seed, "RAND seed");
  app->add_option("--coeffs", o.coeffs, "time model coefficients JSON");
  app->add_option("--overlap", o.overlap, "plan and execute traces in the background")
      ->check(CLI::IsMember({"on", "off"}));
}

bf::EngineConfig engine_config(const Options& o) {
  bf::EngineConfig cfg;
  cfg.workers = resolve_workers(o.workers);
  cfg.buffer_elems = o.buffer_elems;
  cfg.divisor = o.divisor;
  cfg.precision = o.precision == "double" ? bf::Precision::Double : bf::Precision::Single;
  return cfg;
}

bf::SessionConfig session_config(const Options& o, bool keep_artifacts) {
  bf::SessionConfig cfg;
  cfg.engine = engine_config(o);
  cfg.scheduler = *bf::parse_scheduler(o.scheduler);
  if (o.exact_budget > 0) cfg.exact.node_budget = o.exact_budget;
  cfg.trace_threshold = o.trace_threshold;
  cfg.overlap = o.overlap == "on";
  cfg.keep_artifacts = keep_artifacts;
  if (!o.coeffs.empty()) {
    cfg.model = std::make_shared<const bf::TimeModel>(bf::TimeModel::from_json(read_file(o.coeffs)));
  }
  return cfg;
}

struct ScriptResult {
  std::vector<bf::TraceStats> traces;
  double wall_ns = 0;
};

ScriptResult run_script(const bf::Program& program, const bf::SessionConfig& cfg,
                        std::uint64_t seed, std::ostream& out) {
  ScriptResult r;
  const auto t0 = std::chrono::steady_clock::now();
  bf::Session session(cfg);
  bf::run_program(program, session, out, {seed});
  r.wall_ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count();
  r.traces = session.traces();
  return r;
}

int cmd_run(const std::string& script, const Options& o) {
  const bool keep = !o.report.empty() || !o.schedule.empty();
  const bf::Program program = bf::parse_script(read_file(script));
  ScriptResult r = run_script(program, session_config(o, keep), o.seed, std::cout);
  if (!o.report.empty()) {
    bf::Json doc = bf::Json::array();
    for (const auto& t : r.traces) {
      bf::Json j = bf::report_to_json(t.artifacts->report);
      j["trace"] = t.index;
      doc.push_back(std::move(j));
    }
    write_file(o.report, doc.dump(2) + "\n");
  }
  if (!o.schedule.empty()) {
    bf::Json doc = bf::Json::array();
    for (const auto& t : r.traces) {
      bf::Json j = bf::schedule_to_json(t.artifacts->schedule, t.artifacts->costed);
      j["trace"] = t.index;
      doc.push_back(std::move(j));
    }
    write_file(o.schedule, doc.dump(2) + "\n");
  }
  return 0;
}

void print_residuals(const bf::TimeModel& model) {
  for (const auto& [cls, stages] : model.classes()) {
    for (const auto& [stage, m] : stages) {
      std::cout << cls << "/" << bf::to_string(stage) << ": samples " << m.samples
                << ", residual " << bf::format_number(m.residual) << ", a = [";
      for (std::size_t i = 0; i < m.a.size(); ++i) {
        std::cout << (i ? ", " : "") << bf::format_number(m.a[i]);
      }
      std::cout << "]\n";
    }
  }
}

int cmd_profile(const Options& o, std::size_t stride, std::size_t reps,
                const std::string& samples_path, const std::string& out_path) {
  bf::ProfileOptions po;
  po.engine = engine_config(o);
  po.stride = stride;
  po.repetitions = reps;
  po.seed = o.seed;
  po.progress = [](std::size_t done, std::size_t total) {
    if (done % 50 == 0 || done == total) std::cerr << "\rprofiled " << done << "/" << total << std::flush;
  };
  auto samples = bf::profile(po);
  std::cerr << "\n";
  write_file(samples_path, bf::samples_to_csv(samples));
  bf::TimeModel model = bf::fit(samples);
  write_file(out_path, model.to_json() + "\n");
  print_residuals(model);
  return 0;
}

int cmd_fit(const std::string& samples_path, const std::string& out_path) {
  auto samples = bf::samples_from_csv(read_file(samples_path));
  bf::TimeModel model = bf::fit(samples);
  write_file(out_path, model.to_json() + "\n");
  print_residuals(model);
  return 0;
}

int cmd_compare(const std::string& script, const Options& o, const std::string& csv) {
  const bf::Program program = bf::parse_script(read_file(script));
  const bool fresh = csv.empty() || !std::filesystem::exists(csv);
  std::ostringstream rows;
  if (fresh) {
    rows << "script,scheduler,workers,traces,instructions,schedule_ms,makespan_est_ms,"
            "makespan_measured_ms,wall_ms\n";
  }
  for (const char* kind : {"heuristic", "naive"}) {
    Options ok = o;
    ok.scheduler = kind;
    bf::SessionConfig cfg = session_config(ok, false);
    std::ostringstream sink;
    ScriptResult r = run_script(program, cfg, o.seed, sink);
    double sched = 0, est = 0, meas = 0;
    std::size_t instrs = 0;
    for (const auto& t : r.traces) {
      sched += t.schedule_ns;
      est += t.estimated_makespan_ns;
      meas += t.measured_makespan_ns;
      instrs += t.instructions;
    }
    rows << script << "," << kind << "," << cfg.engine.workers << "," << r.traces.size() << ","
         << instrs << "," << sched / 1e6 << "," << est / 1e6 << "," << meas / 1e6 << ","
         << r.wall_ns / 1e6 << "\n";
  }
  std::cout << rows.str();
  if (!csv.empty()) {
    std::ofstream out(csv, std::ios::app);
    if (!out) throw IoError("cannot write " + csv);
    out << rows.str();
  }
  return 0;
}

int cmd_export(const std::string& what, const std::string& input, const Options& o,
               const std::string& out_path, std::size_t trace) {
  std::string text;
  if (what == "gantt") {
    auto bars = bf::gantt_bars(bf::Json::parse(read_file(input)));
    text = bf::gantt_to_json(bars).dump(2) + "\n";
  } else {
    const bf::Program program = bf::parse_script(read_file(input));
    std::ostringstream sink;
    ScriptResult r = run_script(program, session_config(o, true), o.seed, sink);
    if (what == "ilp") {
      if (trace >= r.traces.size()) {
        throw std::invalid_argument("script produced " + std::to_string(r.traces.size()) +
                                    " trace(s); no trace " + std::to_string(trace));
      }
      text = bf::emit_ilp(r.traces[trace].artifacts->costed, session_config(o, false).engine.workers);
    } else {
      bf::Json doc = bf::Json::array();
      for (const auto& t : r.traces) {
        bf::Json j = bf::lowered_to_json(t.artifacts->lowered);
        j["trace"] = t.index;
        doc.push_back(std::move(j));
      }
      text = doc.dump(2) + "\n";
    }
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  return 0;
}

int cmd_bench_deviation(const Options& o, std::size_t traces, const std::string& hist_path,
                        const std::string& per_trace_path) {
  const bf::Program program = bf::parse_script(bf::matmul_traces_script(traces, o.seed + 1));
  std::ostringstream sink;
  ScriptResult r = run_script(program, session_config(o, false), o.seed, sink);
  std::vector<double> dev;
  std::ostringstream per;
  per << "trace,instructions,makespan_est_ns,makespan_measured_ns,deviation\n";
  for (const auto& t : r.traces) {
    if (t.estimated_makespan_ns <= 0) continue;
    const double d = (t.measured_makespan_ns - t.estimated_makespan_ns) / t.estimated_makespan_ns;
    dev.push_back(d);
    per << t.index << "," << t.instructions << "," << t.estimated_makespan_ns << ","
        << t.measured_makespan_ns << "," << d << "\n";
  }
  if (dev.empty()) throw std::runtime_error("no traces to compare");
  std::ostringstream hist;
  hist << "bin_lo,bin_hi,count\n";
  for (const auto& b : bf::histogram(dev, 0.05)) hist << b.lo << "," << b.hi << "," << b.count << "\n";
  if (!hist_path.empty()) write_file(hist_path, hist.str());
  if (!per_trace_path.empty()) write_file(per_trace_path, per.str());
  std::cout << "traces " << dev.size() << "\nmedian " << bf::median(dev) << "\nskewness "
            << bf::skewness(dev) << "\n";
  if (hist_path.empty()) std::cout << hist.str();
  return 0;
}

int cmd_bench_scaling(const Options& o, std::size_t chains, std::size_t length, std::size_t n,
                      std::size_t workers) {
  const bf::Program program = bf::parse_script(bf::synth_chains_script(chains, length, n));
  std::cout << "workers,makespan_measured_ms,makespan_est_ms\n";
  double base = 0;
  for (std::size_t p : {std::size_t{1}, workers}) {
    Options op = o;
    op.workers = p;
    std::ostringstream sink;
    ScriptResult r = run_script(program, session_config(op, false), o.seed, sink);
    double meas = 0, est = 0;
    for (const auto& t : r.traces) {
      meas += t.measured_makespan_ns;
      est += t.estimated_makespan_ns;
    }
    if (p == 1) base = meas;
    std::cout << p << "," << meas / 1e6 << "," << est / 1e6 << "\n";
    if (p != 1) std::cout << "ratio " << meas / base << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lazy block-matrix execution engine driver"};
  app.require_subcommand(1);
  Options o;

  std::string script;
  auto* run = app.add_subcommand("run", "execute a trace script");
  run->add_option("script", script, "script file")->required();
  add_run_flags(run, o);
  run->add_option("--report", o.report, "write per-trace run reports (JSON)");
  run->add_option("--schedule", o.schedule, "write per-trace schedules (JSON)");

  std::size_t stride = 16, reps = 5;
  std::string samples_path = "samples.csv", coeffs_out = "coeffs.json";
  auto* prof = app.add_subcommand("profile", "profile block kernels and fit the time model");
  add_engine_flags(prof, o);
  prof->add_option("--seed", o.seed, "input data seed");
  prof->add_option("--stride", stride, "block edge sweep stride");
  prof->add_option("--reps", reps, "repetitions per size");
  prof->add_option("--samples", samples_path, "samples CSV output");
  prof->add_option("--out", coeffs_out, "coefficients JSON output");

  auto* fit = app.add_subcommand("fit", "fit coefficients from a samples CSV");
  fit->add_option("--from-samples", samples_path, "samples CSV")->required();
  fit->add_option("--out", coeffs_out, "coefficients JSON output");

  std::string csv;
  auto* cmp = app.add_subcommand("compare", "heuristic vs naive scheduling of a script");
  cmp->add_option("script", script, "script file")->required();
  add_run_flags(cmp, o);
  cmp->add_option("--csv", csv, "append result rows to this CSV");

  std::string what, input, out_path;
  std::size_t trace = 0;
  auto* exp = app.add_subcommand("export", "write ILP, Gantt or lowered-graph files");
  exp->add_option("what", what, "ilp | gantt | lowered")
      ->required()
      ->check(CLI::IsMember({"ilp", "gantt", "lowered"}));
  exp->add_option("input", input, "script (ilp, lowered) or schedule/report JSON (gantt)")
      ->required();
  exp->add_option("-o,--out", out_path, "output file (default stdout)");
  exp->add_option("--trace", trace, "trace index for ilp");
  add_run_flags(exp, o);

  std::string mode;
  std::size_t traces = 50, chains = 64, length = 4, n = 96, bench_workers = 4;
  std::string hist_path, per_trace_path;
  auto* bench = app.add_subcommand("bench", "deviation histogram or worker scaling");
  bench->add_option("mode", mode, "deviation | scaling")
      ->required()
      ->check(CLI::IsMember({"deviation", "scaling"}));
  add_run_flags(bench, o);
  bench->add_option("--traces", traces, "deviation: number of traces");
  bench->add_option("--histogram", hist_path, "deviation: histogram CSV output");
  bench->add_option("--per-trace", per_trace_path, "deviation: per-trace CSV output");
  bench->add_option("--chains", chains, "scaling: independent chains");
  bench->add_option("--length", length, "scaling: products per chain");
  bench->add_option("--size", n, "scaling: matrix edge");
  bench->add_option("--max-workers", bench_workers, "scaling: worker count compared with 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(script, o);
    if (*prof) return cmd_profile(o, stride, reps, samples_path, coeffs_out);
    if (*fit) return cmd_fit(samples_path, coeffs_out);
    if (*cmp) return cmd_compare(script, o, csv);
    if (*exp) return cmd_export(what, input, o, out_path, trace);
    if (*bench) {
      return mode == "deviation" ? cmd_bench_deviation(o, traces, hist_path, per_trace_path)
                                 : cmd_bench_scaling(o, chains, length, n, bench_workers);
    }
  } catch (const bf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const bf::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitShape;
  } catch (const bf::SizeCapError& e) {
    std::cerr << "size cap: " << e.what() << "\n";
    return kExitShape;
  } catch (const bf::RankDeficientError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kExitShape;
  } catch (const bf::EngineError& e) {
    std::cerr << "engine failure: " << e.what() << "\n";
    return kExitEngine;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
