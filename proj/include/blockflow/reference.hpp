#pragma once

#include <optional>
#include <span>

#include "blockflow/matrix.hpp"
#include "blockflow/opcode.hpp"

namespace blockflow {

/// Logical result shape of `op`; throws ShapeError on incompatible operands.
Shape result_shape(Opcode op, std::span<const Shape> operands);

/// Dense evaluation on the unpartitioned logical data: plain triple loop for
/// MMul, direct element maps otherwise. This is the oracle the block engine
/// is checked against, so it shares no code with the engine kernels.
Matrix reference_eval(Opcode op, std::span<const Matrix* const> operands,
                      std::optional<double> scalar = std::nullopt);

}  // namespace blockflow
