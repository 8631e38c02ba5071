#include <doctest.h>

#include <algorithm>
#include <memory>
#include <random>

#include "../support/oracles.hpp"
#include "blockflow/engine.hpp"
#include "blockflow/errors.hpp"
#include "blockflow/kernels.hpp"
#include "blockflow/reference.hpp"

using namespace blockflow;
using blockflow::testing::max_norm_error;

namespace {

Matrix random_matrix(Precision p, std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n * m);
  for (double& x : v) x = u(rng);
  return make_matrix(p, n, m, 4, v);
}

struct Plan {
  Ddg ddg;
  ConstantMap constants;
  LoweredGraph lowered;
  CostedGraph costed;
  Schedule schedule;

  NodeId constant(Matrix m) {
    const NodeId id = ddg.size() + 1;
    ddg.add_constant(id, m.shape());
    constants[id] = std::make_shared<const Matrix>(std::move(m));
    return id;
  }
  NodeId op(Opcode o, std::vector<NodeId> args, std::optional<double> s = std::nullopt) {
    const NodeId id = ddg.size() + 1;
    ddg.add_op(id, o, std::move(args), s);
    return id;
  }
  void build(std::size_t workers, const EngineConfig& cfg) {
    lowered = lower_graph(ddg, cfg.divisor, cfg.buffer_elems);
    costed = build_costed_graph(lowered, default_time_model());
    schedule = heuristic_schedule(costed, workers);
  }
  EngineResult run(const EngineConfig& cfg) {
    build(cfg.workers, cfg);
    Engine e(cfg);
    return e.run(lowered, costed, schedule, constants);
  }
};

EngineConfig config(std::size_t workers, Precision p = Precision::Single) {
  EngineConfig c;
  c.workers = workers;
  c.precision = p;
  c.instrumented = true;
  return c;
}

void check_protocol(const EngineResult& r, const CostedGraph& g, std::size_t capacity) {
  const RunReport& rep = r.report;
  REQUIRE(rep.instructions.size() == g.size());
  for (std::size_t peak : rep.max_mailbox) CHECK(peak <= capacity);
  double last = 0;
  for (const InstructionRecord& x : rep.instructions) {
    CHECK(x.dispatch <= x.received);
    CHECK(x.received <= x.df_issue);
    CHECK(x.df_issue <= x.df_start);
    CHECK(x.df_start <= x.df_end);
    CHECK(x.df_end <= x.ex_start);
    CHECK(x.ex_start <= x.ex_end);
    CHECK(x.ex_end <= x.wb_issue);
    CHECK(x.wb_issue <= x.wb_start);
    CHECK(x.wb_start <= x.wb_end);
    CHECK(x.wb_end <= x.observed);
    last = std::max(last, x.wb_end);
    for (std::size_t p : g.predecessors(x.instruction)) {
      CHECK(x.dispatch >= rep.instructions[p].observed);
      CHECK(x.dispatch >= rep.instructions[p].wb_end);
    }
  }
  CHECK(rep.makespan_ns == last);

  // A staging buffer is refilled only after the write back that drained it.
  for (const InstructionRecord& a : rep.instructions) {
    for (const InstructionRecord& b : rep.instructions) {
      if (a.worker != b.worker || b.ex_start <= a.ex_start) continue;
      if (b.buffer_in == a.buffer_out) CHECK(b.df_start >= a.wb_end);
      if (b.buffer_out == a.buffer_out) CHECK(b.ex_start >= a.wb_end);
    }
  }
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("kernels on the small examples") {
    std::vector<double> s{-2, 0, 3, -0.5}, m{5, 7, 9, 11};
    Matrix a = make_matrix(Precision::Double, 2, 2, 2, s);
    Matrix b = make_matrix(Precision::Double, 2, 2, 2, m);
    const Matrix* sa[] = {&a};
    const Matrix* sb[] = {&b};
    CHECK(execute_block_op(Opcode::Sign, sa).logical_values() == std::vector<double>{-1, 0, 1, -1});
    CHECK(execute_block_op(Opcode::Mod, sb, 4.0).logical_values() == std::vector<double>{1, 3, 1, 3});
  }

  TEST_CASE("block product matches the triple loop") {
    Matrix a = random_matrix(Precision::Single, 96, 96, 1);
    Matrix b = random_matrix(Precision::Single, 96, 96, 2);
    const Matrix* ops[] = {&a, &b};
    CHECK(max_norm_error(reference_eval(Opcode::MMul, ops), execute_block_op(Opcode::MMul, ops)) <= 1e-5);
  }

  TEST_CASE("element-wise kernels agree with the reference bit for bit") {
    Matrix a = random_matrix(Precision::Single, 7, 9, 3);
    Matrix b = random_matrix(Precision::Single, 7, 9, 4);
    for (Opcode op : kAllOpcodes) {
      if (op == Opcode::MMul) continue;
      std::vector<const Matrix*> ops{&a};
      if (arity(op) == 2) ops.push_back(&b);
      std::optional<double> s;
      if (has_scalar(op)) s = 0.3;
      CAPTURE(name(op));
      CHECK(execute_block_op(op, ops, s) == reference_eval(op, ops, s));
    }
  }

  TEST_CASE("kernels reject mismatched blocks") {
    std::vector<float> x(16);
    const float* ptrs[] = {x.data(), x.data()};
    Shape shapes[] = {{4, 4}, {4, 8}};
    CHECK_THROWS_AS(execute_block_op<float>(Opcode::MAdd, ptrs, shapes, std::nullopt, x.data(), {4, 4}),
                    ShapeError);
    CHECK_THROWS_AS(execute_block_op<float>(Opcode::SAdd, std::span(ptrs, 1), std::span(shapes, 1),
                                            std::nullopt, x.data(), {4, 4}),
                    ShapeError);
  }

  TEST_CASE("MADD of the two-by-two constants") {
    Plan p;
    std::vector<double> v{1, 2, 3, 4};
    NodeId a = p.constant(make_matrix(Precision::Single, 2, 2, 4, v));
    NodeId b = p.constant(make_matrix(Precision::Single, 2, 2, 4, v));
    NodeId c = p.op(Opcode::MAdd, {a, b});
    EngineResult r = p.run(config(1));
    CHECK(r.values.at(c).logical_values() == std::vector<double>{2, 4, 6, 8});
    check_protocol(r, p.costed, 4);
  }

  TEST_CASE("results are bitwise identical for every worker count") {
    for (Precision prec : {Precision::Single, Precision::Double}) {
      Plan p;
      NodeId a = p.constant(random_matrix(prec, 150, 210, 5));
      NodeId b = p.constant(random_matrix(prec, 210, 130, 6));
      NodeId c = p.op(Opcode::MMul, {a, b});
      NodeId d = p.op(Opcode::SAdd, {c}, 0.25);
      NodeId e = p.op(Opcode::EMul, {d, c});
      NodeId f = p.op(Opcode::Abs, {e});

      std::vector<Matrix> refs;
      {
        const Matrix* ab[] = {p.constants[a].get(), p.constants[b].get()};
        refs.push_back(reference_eval(Opcode::MMul, ab));
        const Matrix* r1[] = {&refs[0]};
        refs.push_back(reference_eval(Opcode::SAdd, r1, 0.25));
        const Matrix* r2[] = {&refs[1], &refs[0]};
        refs.push_back(reference_eval(Opcode::EMul, r2));
        const Matrix* r3[] = {&refs[2]};
        refs.push_back(reference_eval(Opcode::Abs, r3));
      }
      const double tol = prec == Precision::Single ? 1e-5 : 1e-12;

      std::optional<Matrix> first;
      for (std::size_t workers : {1, 2, 4, 8}) {
        CAPTURE(workers);
        EngineResult r = p.run(config(workers, prec));
        const Matrix& out = r.values.at(f);
        CHECK(out.pads_are_zero());
        CHECK(max_norm_error(refs[3], out) <= tol);
        CHECK(max_norm_error(refs[0], r.values.at(c)) <= tol);
        if (!first) first = out;
        CHECK(out == *first);
        check_protocol(r, p.costed, 4);
      }
    }
  }

  TEST_CASE("single instruction runs its stages in order") {
    Plan p;
    NodeId a = p.constant(random_matrix(Precision::Single, 64, 64, 7));
    p.op(Opcode::Sin, {a});
    EngineResult r = p.run(config(1));
    REQUIRE(r.report.instructions.size() == 1);
    const InstructionRecord& x = r.report.instructions[0];
    CHECK(x.df_start < x.df_end);
    CHECK(x.df_end <= x.ex_start);
    CHECK(x.ex_start < x.ex_end);
    CHECK(x.ex_end <= x.wb_start);
    CHECK(x.wb_start < x.wb_end);
  }

  TEST_CASE("the next fetch starts before the current execute ends") {
    Plan p;
    std::vector<NodeId> c;
    for (int k = 0; k < 3; ++k) {
      NodeId a = p.constant(random_matrix(Precision::Single, 96, 96, 10 + k));
      c.push_back(p.op(Opcode::MMul, {a, a}));
    }
    EngineResult r = p.run(config(1));
    const auto& rec = r.report.instructions;
    REQUIRE(rec.size() == 3);
    CHECK(rec[1].df_issue < rec[0].ex_end);
    CHECK(rec[1].df_start < rec[0].ex_end);
    CHECK(rec[2].df_issue < rec[1].ex_end);
    check_protocol(r, p.costed, 4);
  }

  TEST_CASE("additions wait for both producer products") {
    Plan p;
    NodeId a = p.constant(random_matrix(Precision::Single, 100, 100, 1));
    NodeId b = p.constant(random_matrix(Precision::Single, 100, 100, 2));
    p.op(Opcode::MMul, {a, b});
    EngineConfig cfg = config(3);
    EngineResult r = p.run(cfg);
    std::size_t adds = 0;
    for (std::size_t i = 0; i < p.costed.size(); ++i) {
      if (p.costed.opcode(i) != Opcode::MAdd) continue;
      ++adds;
      REQUIRE(p.costed.predecessors(i).size() == 2);
      for (std::size_t m : p.costed.predecessors(i)) {
        CHECK(r.report.instructions[i].dispatch >= r.report.instructions[m].observed);
      }
    }
    CHECK(adds == 4);
    check_protocol(r, p.costed, cfg.mailbox_capacity);
  }

  TEST_CASE("mailbox occupancy stays within capacity on a wide trace") {
    Plan p;
    NodeId a = p.constant(random_matrix(Precision::Single, 300, 300, 3));
    NodeId s = p.op(Opcode::SAdd, {a}, 1.0);
    p.op(Opcode::EMul, {s, s});
    for (std::size_t workers : {1, 2}) {
      EngineResult r = p.run(config(workers));
      check_protocol(r, p.costed, 4);
    }
  }

  TEST_CASE("a failing kernel names its instruction") {
    Plan p;
    NodeId a = p.constant(random_matrix(Precision::Single, 100, 100, 1));
    p.op(Opcode::MMul, {a, a});
    for (std::size_t at : {0, 5, 11}) {
      EngineConfig cfg = config(2);
      cfg.inject_fault_at = at;
      try {
        p.run(cfg);
        FAIL("expected an engine failure");
      } catch (const EngineError& e) {
        CHECK(e.instruction() == at);
      }
    }
  }

  TEST_CASE("one pool serves consecutive runs") {
    Plan p;
    NodeId a = p.constant(random_matrix(Precision::Double, 120, 120, 8));
    NodeId b = p.op(Opcode::MMul, {a, a});
    EngineConfig cfg = config(3, Precision::Double);
    p.build(3, cfg);
    Engine e(cfg);
    EngineResult r1 = e.run(p.lowered, p.costed, p.schedule, p.constants);
    EngineResult r2 = e.run(p.lowered, p.costed, p.schedule, p.constants);
    CHECK(r1.values.at(b) == r2.values.at(b));
    for (const WorkerIdle& w : r2.report.idle) {
      CHECK(w.task_ns >= 0);
      CHECK(w.dma_ns >= 0);
      CHECK(w.busy_ns >= 0);
      CHECK(w.task_ns + w.dma_ns + w.busy_ns <= w.wall_ns * 1.0000001 + 1);
    }
  }
}
