#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockflow/ddg.hpp"
#include "blockflow/matrix.hpp"
#include "blockflow/opcode.hpp"

namespace blockflow {

/// Block layout of an n x m matrix: p block rows of heights k, q block
/// columns of widths l. Depends only on (n, m, divisor, buffer capacity).
struct Partitioning {
  std::size_t p = 0;
  std::size_t q = 0;
  std::vector<std::size_t> k;
  std::vector<std::size_t> l;
  std::size_t divisor = 1;
  std::size_t buffer_elems = 0;

  std::size_t row_offset(std::size_t i) const;
  std::size_t col_offset(std::size_t j) const;

  friend bool operator==(const Partitioning&, const Partitioning&) = default;
};

/// Largest legal block edge, divisor * floor(sqrt(S) / divisor).
std::size_t max_block_edge(std::size_t divisor, std::size_t buffer_elems);

/// Throws std::invalid_argument for empty matrices, a zero divisor, or a
/// buffer that cannot hold one divisor x divisor block.
Partitioning partition(std::size_t n, std::size_t m, std::size_t divisor,
                       std::size_t buffer_elems);

using LoweredId = std::size_t;

struct LoweredNode {
  enum class Kind { ConstBlock, BlockOp };

  LoweredId id = 0;
  Kind kind = Kind::ConstBlock;
  NodeId origin = 0;  // unlowered instruction (or constant) this block belongs to

  BlockView view;  // ConstBlock: region of the origin matrix's padded storage

  Opcode op = Opcode::MAdd;  // BlockOp
  std::vector<LoweredId> operands;
  std::optional<double> scalar;

  Shape out_shape;  // block rows x cols, multiples of the divisor
  Shape valid;      // logical (unpadded) extent inside the block

  bool is_op() const noexcept { return kind == Kind::BlockOp; }
};

/// Block matrix of lowered ids with the partitioning it follows.
struct BlockGrid {
  Partitioning part;
  Shape logical;
  std::vector<LoweredId> ids;  // row-major, part.p x part.q

  LoweredId at(std::size_t i, std::size_t j) const { return ids[i * part.q + j]; }
};

class LoweredGraph {
 public:
  LoweredId add_const_block(NodeId origin, BlockView view, Shape valid);
  LoweredId add_block_op(NodeId origin, Opcode op, std::vector<LoweredId> operands,
                         std::optional<double> scalar, Shape out_shape, Shape valid);

  const std::vector<LoweredNode>& nodes() const noexcept { return nodes_; }
  const LoweredNode& node(LoweredId id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t op_count() const noexcept { return op_count_; }

  /// Distinct (producer, consumer) pairs in insertion order.
  const std::vector<std::pair<LoweredId, LoweredId>>& edges() const noexcept {
    return edges_;
  }

  std::map<NodeId, BlockGrid>& result_map() noexcept { return result_map_; }
  const std::map<NodeId, BlockGrid>& result_map() const noexcept { return result_map_; }

  /// Distinct producer ids among a node's operands.
  std::vector<LoweredId> distinct_operands(LoweredId id) const;

 private:
  std::vector<LoweredNode> nodes_;
  std::vector<std::pair<LoweredId, LoweredId>> edges_;
  std::map<NodeId, BlockGrid> result_map_;
  std::size_t op_count_ = 0;
};

/// Block-wise unary op; the result keeps the operand's partitioning.
BlockGrid lower_unary(LoweredGraph& g, NodeId origin, const BlockGrid& operand,
                      Opcode op, std::optional<double> scalar = std::nullopt);

/// Block-wise binary element-wise op. Partition mismatch is an
/// InvariantError: the partitioning scheme makes it unreachable.
BlockGrid lower_binary(LoweredGraph& g, NodeId origin, const BlockGrid& a,
                       const BlockGrid& b, Opcode op);

/// Block matrix product with pairwise (FIFO queue) summation of the
/// q_A block products of every output block.
BlockGrid lower_matmul(LoweredGraph& g, NodeId origin, const BlockGrid& a,
                       const BlockGrid& b);

/// Splits one matrix into ConstBlock views following its partitioning.
BlockGrid lower_constant(LoweredGraph& g, NodeId origin, Shape logical,
                         std::size_t divisor, std::size_t buffer_elems);

LoweredGraph lower_graph(const Ddg& ddg, std::size_t divisor,
                         std::size_t buffer_elems);

/// Compatibility violations (unequal element-wise operand blocks, inner
/// dimension mismatch, oversize or misaligned blocks). Empty when the graph
/// needs no re-partitioning.
std::vector<std::string> check_compatibility(const LoweredGraph& g,
                                             std::size_t divisor,
                                             std::size_t buffer_elems);

/// Longest chain of additions feeding each output block of a lowered
/// matmul: 0 for a single product.
std::size_t add_tree_depth(const LoweredGraph& g, LoweredId root);

}  // namespace blockflow
