#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "blockflow/matrix.hpp"
#include "blockflow/opcode.hpp"

namespace blockflow {

/// Dense kernel on contiguous row-major blocks. `operands` holds one pointer
/// per operand slot with the matching `shapes`; `out` has `out_shape`.
/// Every cell of `out` is written, pads included. Throws ShapeError when
/// the shapes do not fit the opcode.
template <class T>
void execute_block_op(Opcode op, std::span<const T* const> operands,
                      std::span<const Shape> shapes, std::optional<T> scalar, T* out,
                      Shape out_shape);

extern template void execute_block_op<float>(Opcode, std::span<const float* const>,
                                             std::span<const Shape>, std::optional<float>,
                                             float*, Shape);
extern template void execute_block_op<double>(Opcode, std::span<const double* const>,
                                              std::span<const Shape>, std::optional<double>,
                                              double*, Shape);

/// Convenience form treating each matrix's padded storage as one block.
/// The result's pads are zeroed.
Matrix execute_block_op(Opcode op, std::span<const Matrix* const> operands,
                        std::optional<double> scalar = std::nullopt);

}  // namespace blockflow
