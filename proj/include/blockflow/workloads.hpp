#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace blockflow {

/// `chains` independent product chains X = MMUL(X, B) of n x n random
/// matrices, `length` products each. The chain ends are summed pairwise
/// and the sum printed, so the whole workload is one trace.
std::string synth_chains_script(std::size_t chains, std::size_t length, std::size_t n);

/// `traces` independent product-heavy expressions over random matrices
/// with edges up to max_dim; each ends in a PRINT, which closes its trace.
std::string matmul_traces_script(std::size_t traces, std::uint64_t seed,
                                 std::size_t max_dim = 288);

/// Several long dependency chains of products and element-wise ops with
/// uneven costs, printed together.
std::string chain_heavy_script(std::size_t chains, std::size_t length, std::size_t n,
                               std::uint64_t seed);

}  // namespace blockflow
