#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blockflow/matrix.hpp"
#include "blockflow/opcode.hpp"

namespace blockflow {

using NodeId = std::uint64_t;

struct DdgNode {
  enum class Kind { Constant, Op };

  NodeId id = 0;
  Kind kind = Kind::Constant;
  Opcode op = Opcode::MAdd;         // Op only
  std::vector<NodeId> operands;     // one slot per operand occurrence
  std::optional<double> scalar;     // scalar-parameter opcodes only
  Shape shape;

  bool is_constant() const noexcept { return kind == Kind::Constant; }
};

/// Frozen data-dependence graph of one trace. Nodes are kept in insertion
/// order, and an op may only name operands added before it, so insertion
/// order is a topological order.
class Ddg {
 public:
  void add_constant(NodeId id, Shape shape);

  /// Throws ShapeError for incompatible operand shapes and
  /// std::invalid_argument for unknown or duplicate ids.
  void add_op(NodeId id, Opcode op, std::vector<NodeId> operands,
              std::optional<double> scalar = std::nullopt);

  const std::vector<DdgNode>& nodes() const noexcept { return nodes_; }
  const DdgNode& node(NodeId id) const;
  bool contains(NodeId id) const noexcept { return index_.count(id) != 0; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  /// Distinct (producer, consumer) pairs.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  /// Operand slots count every occurrence: MMUL(X, X) contributes two.
  std::size_t operand_slot_count() const;

 private:
  std::vector<DdgNode> nodes_;
  std::unordered_map<NodeId, std::size_t> index_;
};

}  // namespace blockflow
