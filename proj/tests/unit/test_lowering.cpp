#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "blockflow/ddg.hpp"
#include "blockflow/errors.hpp"
#include "blockflow/lowering.hpp"

using namespace blockflow;

namespace {

std::size_t count_ops(const LoweredGraph& g, Opcode op) {
  return static_cast<std::size_t>(std::count_if(g.nodes().begin(), g.nodes().end(),
                                                [&](const LoweredNode& n) {
                                                  return n.is_op() && n.op == op;
                                                }));
}

void check_partition_invariants(std::size_t n, std::size_t delta, std::size_t S,
                                const std::vector<std::size_t>& k) {
  const std::size_t padded = pad_dims(n, 1, delta).first;
  const std::size_t edge = max_block_edge(delta, S);
  CHECK(std::accumulate(k.begin(), k.end(), std::size_t{0}) == padded);
  for (std::size_t i = 0; i < k.size(); ++i) {
    CHECK(k[i] % delta == 0);
    CHECK(k[i] >= delta);
    CHECK(k[i] <= edge);
    if (i) {
      CHECK(k[i] <= k[i - 1]);
      CHECK(k[0] - k[i] <= delta);
    }
  }
}

}  // namespace

TEST_SUITE("lowering") {
  TEST_CASE("partition of the reference sizes") {
    Partitioning a = partition(100, 100, 4, 9216);
    CHECK(a.p == 2);
    CHECK(a.q == 2);
    CHECK(a.k == std::vector<std::size_t>{52, 48});
    CHECK(a.l == std::vector<std::size_t>{52, 48});

    Partitioning b = partition(200, 200, 2, 4608);
    CHECK(b.p == 4);
    CHECK(b.k == std::vector<std::size_t>(4, 50));
    CHECK(b.l == std::vector<std::size_t>(4, 50));

    Partitioning v = partition(1, 1000, 1, 9216);
    CHECK(v.p == 1);
    for (std::size_t l : v.l) CHECK(l <= 96);
  }

  TEST_CASE("partition invariants over a grid of sizes") {
    for (std::size_t delta : {1, 2, 4}) {
      for (std::size_t S : {256, 4608, 9216}) {
        for (std::size_t n = 1; n <= 400; n += 7) {
          Partitioning p = partition(n, 401 - n, delta, S);
          check_partition_invariants(n, delta, S, p.k);
          check_partition_invariants(401 - n, delta, S, p.l);
          CHECK(p.row_offset(p.p) == pad_dims(n, 1, delta).first);
        }
      }
    }
  }

  TEST_CASE("partition rejects impossible layouts") {
    CHECK_THROWS_AS(partition(0, 4, 4, 9216), std::invalid_argument);
    CHECK_THROWS_AS(partition(4, 4, 0, 9216), std::invalid_argument);
    CHECK_THROWS_AS(partition(4, 4, 4, 15), std::invalid_argument);
  }

  TEST_CASE("unary lowering is block-wise") {
    LoweredGraph g;
    BlockGrid a = lower_constant(g, 1, {6, 4}, 1, 4);
    REQUIRE(a.part.p == 3);
    REQUIRE(a.part.q == 2);
    lower_unary(g, 2, a, Opcode::Sin);
    CHECK(g.op_count() == 6);
    CHECK(g.edges().size() == 6);

    LoweredGraph g1;
    BlockGrid one = lower_constant(g1, 1, {3, 3}, 4, 9216);
    lower_unary(g1, 2, one, Opcode::Abs);
    CHECK(g1.op_count() == 1);

    LoweredGraph g2;
    BlockGrid two = lower_constant(g2, 1, {4, 4}, 1, 4);
    BlockGrid r = lower_unary(g2, 2, two, Opcode::SAdd, 5.0);
    CHECK(g2.op_count() == 4);
    for (LoweredId id : r.ids) CHECK(g2.node(id).scalar == 5.0);
  }

  TEST_CASE("binary lowering pairs matching blocks") {
    LoweredGraph g;
    BlockGrid a = lower_constant(g, 1, {4, 4}, 1, 4);
    BlockGrid b = lower_constant(g, 2, {4, 4}, 1, 4);
    lower_binary(g, 3, a, b, Opcode::MAdd);
    CHECK(g.op_count() == 4);
    CHECK(g.edges().size() == 8);

    LoweredGraph h;
    BlockGrid x = lower_constant(h, 1, {100, 100}, 4, 9216);
    BlockGrid y = lower_constant(h, 2, {100, 100}, 4, 9216);
    BlockGrid d = lower_binary(h, 3, x, y, Opcode::MSub);
    CHECK(h.op_count() == 4);
    CHECK(d.part.k == std::vector<std::size_t>{52, 48});

    BlockGrid z = lower_constant(h, 4, {100, 96}, 4, 9216);
    CHECK_THROWS_AS(lower_binary(h, 5, x, z, Opcode::MAdd), InvariantError);
  }

  TEST_CASE("block product counts and add-tree depth") {
    LoweredGraph g;
    BlockGrid a = lower_constant(g, 1, {6, 4}, 1, 4);
    BlockGrid b = lower_constant(g, 2, {4, 4}, 1, 4);
    REQUIRE(a.part.q == 2);
    REQUIRE(b.part.p == 2);
    REQUIRE(b.part.q == 2);
    lower_matmul(g, 3, a, b);
    CHECK(count_ops(g, Opcode::MMul) == 12);
    CHECK(count_ops(g, Opcode::MAdd) == 6);

    LoweredGraph h;
    BlockGrid wide = lower_constant(h, 1, {2, 16}, 1, 4);
    BlockGrid tall = lower_constant(h, 2, {16, 2}, 1, 4);
    REQUIRE(wide.part.q == 8);
    BlockGrid out = lower_matmul(h, 3, wide, tall);
    REQUIRE(out.ids.size() == 1);
    CHECK(add_tree_depth(h, out.ids[0]) == 3);
    CHECK(count_ops(h, Opcode::MAdd) == 7);

    LoweredGraph s;
    BlockGrid u = lower_constant(s, 1, {2, 2}, 1, 4);
    BlockGrid o = lower_matmul(s, 3, u, u);
    CHECK(s.op_count() == 1);
    CHECK(add_tree_depth(s, o.ids[0]) == 0);
  }

  TEST_CASE("add-tree depth is ceil(log2 q) for every inner block count") {
    for (std::size_t q = 1; q <= 17; ++q) {
      LoweredGraph g;
      BlockGrid a = lower_constant(g, 1, {2, 2 * q}, 1, 4);
      BlockGrid b = lower_constant(g, 2, {2 * q, 2}, 1, 4);
      BlockGrid out = lower_matmul(g, 3, a, b);
      const auto expect = static_cast<std::size_t>(std::ceil(std::log2(double(q))));
      CAPTURE(q);
      CHECK(add_tree_depth(g, out.ids[0]) == expect);
      CHECK(count_ops(g, Opcode::MAdd) == q - 1);
    }
  }

  TEST_CASE("two chained 100x100 products lower into grouped blocks") {
    Ddg d;
    d.add_constant(1, {100, 100});
    d.add_constant(2, {100, 100});
    d.add_op(3, Opcode::MMul, {1, 2});
    d.add_op(4, Opcode::MMul, {1, 3});
    LoweredGraph g = lower_graph(d, 4, 9216);
    CHECK(count_ops(g, Opcode::MMul) == 16);
    CHECK(count_ops(g, Opcode::MAdd) == 8);
    std::map<NodeId, std::size_t> per_origin;
    for (const LoweredNode& n : g.nodes()) {
      if (n.is_op()) ++per_origin[n.origin];
    }
    CHECK(per_origin[3] == 12);
    CHECK(per_origin[4] == 12);
    CHECK(g.result_map().count(3) == 1);
    CHECK(g.result_map().count(4) == 1);
    CHECK(check_compatibility(g, 4, 9216).empty());

    CHECK(lower_graph(Ddg{}, 4, 9216).empty());
  }

  TEST_CASE("valid extents cover exactly the logical region") {
    LoweredGraph g;
    BlockGrid a = lower_constant(g, 1, {101, 7}, 4, 256);
    std::size_t rows = 0, cols = 0;
    for (std::size_t i = 0; i < a.part.p; ++i) rows += g.node(a.at(i, 0)).valid.rows;
    for (std::size_t j = 0; j < a.part.q; ++j) cols += g.node(a.at(0, j)).valid.cols;
    CHECK(rows == 101);
    CHECK(cols == 7);
  }

  TEST_CASE("random graphs never need re-partitioning") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim(1, 260);
    for (int trial = 0; trial < 40; ++trial) {
      Ddg d;
      std::vector<Shape> shapes;
      NodeId next = 1;
      for (int c = 0; c < 3; ++c) {
        Shape s{dim(rng), dim(rng)};
        d.add_constant(next++, s);
        shapes.push_back(s);
      }
      for (int k = 0; k < 8; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, shapes.size() - 1);
        const std::size_t a = pick(rng);
        const Shape sa = shapes[a];
        if (rng() % 2) {
          Shape sb{sa.cols, dim(rng)};
          d.add_constant(next++, sb);
          shapes.push_back(sb);
          d.add_op(next++, Opcode::MMul, {a + 1, shapes.size()});
          shapes.push_back({sa.rows, sb.cols});
        } else {
          d.add_op(next++, Opcode::MAdd, {a + 1, a + 1});
          shapes.push_back(sa);
        }
      }
      LoweredGraph g = lower_graph(d, 4, 4608);
      CHECK(check_compatibility(g, 4, 4608).empty());
    }
  }
}
