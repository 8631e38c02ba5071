#include "blockflow/profile.hpp"

#include <random>
#include <stdexcept>

#include "blockflow/lowering.hpp"
#include "blockflow/scheduler.hpp"

namespace blockflow {

std::vector<std::size_t> sweep_sizes(std::size_t divisor, std::size_t buffer_elems,
                                     std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("sweep stride must be positive");
  const std::size_t cap = max_block_edge(divisor, buffer_elems);
  std::vector<std::size_t> sizes;
  for (std::size_t s = divisor; s <= cap; s += stride) sizes.push_back(s);
  if (sizes.empty() || sizes.back() != cap) sizes.push_back(cap);
  return sizes;
}

namespace {

std::shared_ptr<const Matrix> random_matrix(Precision prec, std::size_t n, std::size_t m,
                                            std::size_t divisor, std::mt19937_64& rng) {
  // Values in [0.5, 1.5): no denormals, no zero divisors, finite powers.
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> v(n * m);
  for (double& x : v) x = u(rng);
  return std::make_shared<const Matrix>(make_matrix(prec, n, m, divisor, v));
}

}  // namespace

std::vector<ProfileSample> profile(const ProfileOptions& options) {
  EngineConfig cfg = options.engine;
  cfg.workers = 1;
  cfg.isolate_ops = true;
  cfg.instrumented = true;
  Engine engine(cfg);
  std::mt19937_64 rng(options.seed);

  const auto sizes = sweep_sizes(cfg.divisor, cfg.buffer_elems, options.stride);
  std::size_t total = 0;
  for (Opcode op : options.opcodes) {
    total += op == Opcode::MMul ? sizes.size() * sizes.size() * sizes.size()
                                : sizes.size() * sizes.size();
  }

  std::vector<ProfileSample> samples;
  std::size_t done = 0;
  auto run_point = [&](Opcode op, std::size_t n1, std::size_t n2, std::size_t n3) {
    const std::size_t R = options.repetitions;
    Ddg ddg;
    ConstantMap constants;
    NodeId next = 0;
    std::vector<NodeId> ops;
    for (std::size_t r = 0; r < R; ++r) {
      const NodeId a = next++;
      constants[a] = random_matrix(cfg.precision, n1, n2, cfg.divisor, rng);
      ddg.add_constant(a, {n1, n2});
      std::vector<NodeId> operands{a};
      if (arity(op) == 2) {
        const NodeId b = next++;
        const Shape sb = op == Opcode::MMul ? Shape{n2, n3} : Shape{n1, n2};
        constants[b] = random_matrix(cfg.precision, sb.rows, sb.cols, cfg.divisor, rng);
        ddg.add_constant(b, sb);
        operands.push_back(b);
      }
      std::optional<double> scalar;
      if (has_scalar(op)) scalar = 0.75;
      const NodeId id = next++;
      ddg.add_op(id, op, operands, scalar);
      ops.push_back(id);
    }
    LoweredGraph lg = lower_graph(ddg, cfg.divisor, cfg.buffer_elems);
    CostedGraph cg;
    for (const LoweredNode& n : lg.nodes()) {
      if (n.is_op()) cg.add_instruction({}, n.op, n.id);
    }
    Schedule s = naive_schedule(cg, 1);
    EngineResult result = engine.run(lg, cg, s, constants, ops);

    for (const InstructionRecord& rec : result.report.instructions) {
      const LoweredNode& n = lg.node(rec.lowered);
      std::vector<LoweredId> distinct = lg.distinct_operands(n.id);
      for (std::size_t d = 0; d < distinct.size(); ++d) {
        const Shape s = lg.node(distinct[d]).out_shape;
        samples.push_back({op, Stage::DataFetch,
                           {static_cast<double>(s.rows), static_cast<double>(s.cols)},
                           rec.df_operand_ns[d]});
      }
      const Shape a = lg.node(n.operands[0]).out_shape;
      std::vector<double> ex_dims{static_cast<double>(a.rows), static_cast<double>(a.cols)};
      if (op == Opcode::MMul) {
        ex_dims.push_back(static_cast<double>(lg.node(n.operands[1]).out_shape.cols));
      }
      samples.push_back({op, Stage::Execute, ex_dims, rec.ex()});
      samples.push_back({op, Stage::WriteBack,
                         {static_cast<double>(n.out_shape.rows),
                          static_cast<double>(n.out_shape.cols)},
                         rec.wb()});
    }
    ++done;
    if (options.progress) options.progress(done, total);
  };

  for (Opcode op : options.opcodes) {
    for (std::size_t n1 : sizes) {
      for (std::size_t n2 : sizes) {
        if (op == Opcode::MMul) {
          for (std::size_t n3 : sizes) run_point(op, n1, n2, n3);
        } else {
          run_point(op, n1, n2, 0);
        }
      }
    }
  }
  return samples;
}

}  // namespace blockflow
