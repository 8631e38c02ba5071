#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "blockflow/engine.hpp"
#include "blockflow/opcode.hpp"
#include "blockflow/timemodel.hpp"

namespace blockflow {

struct ProfileOptions {
  EngineConfig engine;  // workers are forced to 1, ops run in isolation
  std::size_t stride = 16;
  std::size_t repetitions = 5;
  std::vector<Opcode> opcodes{kAllOpcodes.begin(), kAllOpcodes.end()};
  std::uint64_t seed = 1;
  /// Called after each (opcode, size) point with points done and total.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Block edges divisor, divisor + stride, ... up to the largest legal edge,
/// which is always included.
std::vector<std::size_t> sweep_sizes(std::size_t divisor, std::size_t buffer_elems,
                                     std::size_t stride);

/// Runs every opcode on single-block operands for all size combinations of
/// the sweep (pairs for element-wise, triples for MMUL) and records df per
/// distinct operand block, ex and wb per repetition.
std::vector<ProfileSample> profile(const ProfileOptions& options);

}  // namespace blockflow
