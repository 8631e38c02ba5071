#include "blockflow/lowering.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <string>

#include "blockflow/errors.hpp"

namespace blockflow {

namespace {

std::size_t valid_extent(std::size_t logical, std::size_t offset, std::size_t size) {
  if (logical <= offset) return 0;
  return std::min(size, logical - offset);
}

}  // namespace

LoweredId LoweredGraph::add_const_block(NodeId origin, BlockView view, Shape valid) {
  LoweredNode n;
  n.id = nodes_.size();
  n.kind = LoweredNode::Kind::ConstBlock;
  n.origin = origin;
  n.view = view;
  n.out_shape = {view.row_count, view.col_count};
  n.valid = valid;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

LoweredId LoweredGraph::add_block_op(NodeId origin, Opcode op,
                                     std::vector<LoweredId> operands,
                                     std::optional<double> scalar, Shape out_shape,
                                     Shape valid) {
  LoweredNode n;
  n.id = nodes_.size();
  n.kind = LoweredNode::Kind::BlockOp;
  n.origin = origin;
  n.op = op;
  n.scalar = scalar;
  n.out_shape = out_shape;
  n.valid = valid;
  std::set<LoweredId> seen;
  for (LoweredId o : operands) {
    if (o >= n.id) throw InvariantError("lowered operand does not precede its consumer");
    if (seen.insert(o).second) edges_.emplace_back(o, n.id);
  }
  n.operands = std::move(operands);
  nodes_.push_back(std::move(n));
  ++op_count_;
  return nodes_.back().id;
}

std::vector<LoweredId> LoweredGraph::distinct_operands(LoweredId id) const {
  std::vector<LoweredId> out;
  for (LoweredId o : nodes_.at(id).operands) {
    if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  }
  return out;
}

BlockGrid lower_constant(LoweredGraph& g, NodeId origin, Shape logical,
                         std::size_t divisor, std::size_t buffer_elems) {
  BlockGrid grid;
  grid.part = partition(logical.rows, logical.cols, divisor, buffer_elems);
  grid.logical = logical;
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < grid.part.p; ++i) {
    std::size_t c0 = 0;
    for (std::size_t j = 0; j < grid.part.q; ++j) {
      BlockView view{r0, grid.part.k[i], c0, grid.part.l[j]};
      Shape valid{valid_extent(logical.rows, r0, grid.part.k[i]),
                  valid_extent(logical.cols, c0, grid.part.l[j])};
      grid.ids.push_back(g.add_const_block(origin, view, valid));
      c0 += grid.part.l[j];
    }
    r0 += grid.part.k[i];
  }
  return grid;
}

BlockGrid lower_unary(LoweredGraph& g, NodeId origin, const BlockGrid& operand,
                      Opcode op, std::optional<double> scalar) {
  BlockGrid out;
  out.part = operand.part;
  out.logical = operand.logical;
  for (LoweredId id : operand.ids) {
    const LoweredNode& src = g.node(id);
    Shape shape = src.out_shape;
    Shape valid = src.valid;
    out.ids.push_back(g.add_block_op(origin, op, {id}, scalar, shape, valid));
  }
  return out;
}

BlockGrid lower_binary(LoweredGraph& g, NodeId origin, const BlockGrid& a,
                       const BlockGrid& b, Opcode op) {
  if (!(a.part == b.part) || a.logical != b.logical) {
    throw InvariantError(std::string("partition mismatch lowering ") +
                         std::string(name(op)));
  }
  BlockGrid out;
  out.part = a.part;
  out.logical = a.logical;
  for (std::size_t n = 0; n < a.ids.size(); ++n) {
    const LoweredNode& src = g.node(a.ids[n]);
    Shape shape = src.out_shape;
    Shape valid = src.valid;
    out.ids.push_back(g.add_block_op(origin, op, {a.ids[n], b.ids[n]}, std::nullopt,
                                     shape, valid));
  }
  return out;
}

BlockGrid lower_matmul(LoweredGraph& g, NodeId origin, const BlockGrid& a,
                       const BlockGrid& b) {
  if (a.part.q != b.part.p || a.part.l != b.part.k || a.logical.cols != b.logical.rows) {
    throw InvariantError("inner partition mismatch lowering MMUL");
  }
  BlockGrid out;
  out.logical = {a.logical.rows, b.logical.cols};
  out.part.p = a.part.p;
  out.part.q = b.part.q;
  out.part.k = a.part.k;
  out.part.l = b.part.l;
  out.part.divisor = a.part.divisor;
  out.part.buffer_elems = a.part.buffer_elems;

  for (std::size_t i = 0; i < a.part.p; ++i) {
    for (std::size_t j = 0; j < b.part.q; ++j) {
      const Shape shape{a.part.k[i], b.part.l[j]};
      const Shape valid{g.node(a.at(i, 0)).valid.rows, g.node(b.at(0, j)).valid.cols};
      std::deque<LoweredId> queue;
      for (std::size_t r = 0; r < a.part.q; ++r) {
        queue.push_back(g.add_block_op(origin, Opcode::MMul, {a.at(i, r), b.at(r, j)},
                                       std::nullopt, shape, valid));
      }
      while (queue.size() > 1) {
        LoweredId s1 = queue.front();
        queue.pop_front();
        LoweredId s2 = queue.front();
        queue.pop_front();
        queue.push_back(
            g.add_block_op(origin, Opcode::MAdd, {s1, s2}, std::nullopt, shape, valid));
      }
      out.ids.push_back(queue.front());
    }
  }
  return out;
}

LoweredGraph lower_graph(const Ddg& ddg, std::size_t divisor, std::size_t buffer_elems) {
  LoweredGraph g;
  auto& grids = g.result_map();
  for (const DdgNode& n : ddg.nodes()) {
    if (n.is_constant()) {
      grids.emplace(n.id, lower_constant(g, n.id, n.shape, divisor, buffer_elems));
      continue;
    }
    const BlockGrid& a = grids.at(n.operands[0]);
    BlockGrid result;
    if (n.op == Opcode::MMul) {
      result = lower_matmul(g, n.id, a, grids.at(n.operands[1]));
    } else if (arity(n.op) == 2) {
      result = lower_binary(g, n.id, a, grids.at(n.operands[1]), n.op);
    } else {
      result = lower_unary(g, n.id, a, n.op, n.scalar);
    }
    grids.emplace(n.id, std::move(result));
  }
  return g;
}

std::vector<std::string> check_compatibility(const LoweredGraph& g, std::size_t divisor,
                                             std::size_t buffer_elems) {
  std::vector<std::string> problems;
  auto report = [&](const LoweredNode& n, const std::string& what) {
    problems.push_back("lowered node " + std::to_string(n.id) + ": " + what);
  };
  for (const LoweredNode& n : g.nodes()) {
    const Shape s = n.out_shape;
    if (s.rows == 0 || s.cols == 0 || s.rows % divisor || s.cols % divisor) {
      report(n, "block dims not a positive multiple of the divisor");
    }
    if (s.rows * s.cols > buffer_elems) report(n, "block exceeds buffer capacity");
    if (!n.is_op()) continue;
    if (n.operands.size() != arity(n.op)) {
      report(n, "operand count does not match opcode arity");
      continue;
    }
    const Shape a = g.node(n.operands[0]).out_shape;
    if (n.op == Opcode::MMul) {
      const Shape b = g.node(n.operands[1]).out_shape;
      if (a.cols != b.rows) report(n, "block product inner dims differ");
      if (s.rows != a.rows || s.cols != b.cols) report(n, "block product result dims");
    } else if (arity(n.op) == 2) {
      const Shape b = g.node(n.operands[1]).out_shape;
      if (a != b) report(n, "element-wise operand blocks differ");
      if (s != a) report(n, "element-wise result dims");
    } else if (s != a) {
      report(n, "unary result dims");
    }
  }
  return problems;
}

std::size_t add_tree_depth(const LoweredGraph& g, LoweredId root) {
  const LoweredNode& n = g.node(root);
  if (!n.is_op() || n.op != Opcode::MAdd) return 0;
  std::size_t depth = 0;
  for (LoweredId o : n.operands) {
    const LoweredNode& child = g.node(o);
    if (child.origin == n.origin) depth = std::max(depth, add_tree_depth(g, o));
  }
  return depth + 1;
}

}  // namespace blockflow
