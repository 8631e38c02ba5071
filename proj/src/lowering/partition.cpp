#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "blockflow/lowering.hpp"

namespace blockflow {

namespace {

std::size_t isqrt(std::size_t v) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Splits `units` divisor-units into ceil(units / cap) near-equal blocks,
// giving the left-over units to the smallest indices.
std::vector<std::size_t> split(std::size_t units, std::size_t cap,
                               std::size_t divisor) {
  const std::size_t blocks = ceil_div(units, cap);
  const std::size_t base = units / blocks;
  const std::size_t spare = units % blocks;
  std::vector<std::size_t> sizes(blocks);
  for (std::size_t i = 0; i < blocks; ++i) {
    sizes[i] = divisor * (base + (i < spare ? 1 : 0));
  }
  return sizes;
}

}  // namespace

std::size_t Partitioning::row_offset(std::size_t i) const {
  return std::accumulate(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(i),
                         std::size_t{0});
}

std::size_t Partitioning::col_offset(std::size_t j) const {
  return std::accumulate(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(j),
                         std::size_t{0});
}

std::size_t max_block_edge(std::size_t divisor, std::size_t buffer_elems) {
  return divisor * (isqrt(buffer_elems) / divisor);
}

Partitioning partition(std::size_t n, std::size_t m, std::size_t divisor,
                       std::size_t buffer_elems) {
  if (n == 0 || m == 0) throw std::invalid_argument("cannot partition an empty matrix");
  if (divisor == 0) throw std::invalid_argument("divisor must be positive");
  if (buffer_elems < divisor * divisor) {
    throw std::invalid_argument("buffer of " + std::to_string(buffer_elems) +
                                " elements cannot hold a " + std::to_string(divisor) +
                                "x" + std::to_string(divisor) + " block");
  }
  const std::size_t cap = isqrt(buffer_elems) / divisor;
  Partitioning part;
  part.divisor = divisor;
  part.buffer_elems = buffer_elems;
  part.k = split(ceil_div(n, divisor), cap, divisor);
  part.l = split(ceil_div(m, divisor), cap, divisor);
  part.p = part.k.size();
  part.q = part.l.size();
  return part;
}

}  // namespace blockflow
