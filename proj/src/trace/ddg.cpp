#include "blockflow/ddg.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "blockflow/errors.hpp"
#include "blockflow/reference.hpp"

namespace blockflow {

void Ddg::add_constant(NodeId id, Shape shape) {
  if (contains(id)) throw std::invalid_argument("duplicate node id " + std::to_string(id));
  DdgNode n;
  n.id = id;
  n.kind = DdgNode::Kind::Constant;
  n.shape = shape;
  index_.emplace(id, nodes_.size());
  nodes_.push_back(std::move(n));
}

void Ddg::add_op(NodeId id, Opcode op, std::vector<NodeId> operands,
                 std::optional<double> scalar) {
  if (contains(id)) throw std::invalid_argument("duplicate node id " + std::to_string(id));
  std::vector<Shape> shapes;
  for (NodeId o : operands) {
    if (!contains(o)) {
      throw std::invalid_argument("operand " + std::to_string(o) +
                                  " is not in the graph");
    }
    shapes.push_back(node(o).shape);
  }
  if (has_scalar(op) && !scalar) {
    throw ShapeError(std::string(name(op)) + " requires a scalar parameter");
  }
  DdgNode n;
  n.id = id;
  n.kind = DdgNode::Kind::Op;
  n.op = op;
  n.shape = result_shape(op, shapes);
  n.operands = std::move(operands);
  n.scalar = has_scalar(op) ? scalar : std::nullopt;
  index_.emplace(id, nodes_.size());
  nodes_.push_back(std::move(n));
}

const DdgNode& Ddg::node(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("no node " + std::to_string(id));
  return nodes_[it->second];
}

std::vector<std::pair<NodeId, NodeId>> Ddg::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const DdgNode& n : nodes_) {
    std::set<NodeId> seen;
    for (NodeId o : n.operands) {
      if (seen.insert(o).second) out.emplace_back(o, n.id);
    }
  }
  return out;
}

std::size_t Ddg::operand_slot_count() const {
  std::size_t total = 0;
  for (const DdgNode& n : nodes_) total += n.operands.size();
  return total;
}

}  // namespace blockflow
