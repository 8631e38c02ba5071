#include "blockflow/reference.hpp"

#include <cmath>
#include <string>

#include "blockflow/errors.hpp"

namespace blockflow {

namespace {

std::string dims(const Shape& s) {
  return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

template <class T>
T apply_scalar_map(Opcode op, T a, T b, T s) {
  switch (op) {
    case Opcode::MAdd: return a + b;
    case Opcode::MSub: return a - b;
    case Opcode::EMul: return a * b;
    case Opcode::EDiv: return a / b;
    case Opcode::EPow: return std::pow(a, b);
    case Opcode::SAdd: return a + s;
    case Opcode::SSub: return a - s;
    case Opcode::SMul: return a * s;
    case Opcode::Abs: return std::fabs(a);
    case Opcode::Mod:
      // Octave convention: result takes the sign of the divisor; mod(x, 0) = x.
      if (s == T{0}) return a;
      return a - std::floor(a / s) * s;
    case Opcode::Sin: return std::sin(a);
    case Opcode::Cos: return std::cos(a);
    case Opcode::Sign:
      if (std::isnan(a)) return a;
      return a > T{0} ? T{1} : (a < T{0} ? T{-1} : T{0});
    case Opcode::Round: return std::round(a);
    case Opcode::Eq: return a == b ? T{1} : T{0};
    case Opcode::Neq: return a != b ? T{1} : T{0};
    case Opcode::MMul: break;
  }
  throw InvariantError("not an element-wise opcode");
}

template <class T>
Matrix eval_typed(Opcode op, std::span<const Matrix* const> in, T scalar,
                  Shape out_shape) {
  const Matrix& a = *in[0];
  Matrix out(a.precision(), out_shape.rows, out_shape.cols, a.divisor());
  auto dst = out.storage<T>();
  const std::size_t ldo = out.padded_cols();
  auto sa = a.storage<T>();
  const std::size_t lda = a.padded_cols();

  if (op == Opcode::MMul) {
    const Matrix& b = *in[1];
    auto sb = b.storage<T>();
    const std::size_t ldb = b.padded_cols();
    for (std::size_t i = 0; i < out_shape.rows; ++i) {
      for (std::size_t j = 0; j < out_shape.cols; ++j) {
        T acc{0};
        for (std::size_t k = 0; k < a.cols(); ++k) {
          acc += sa[i * lda + k] * sb[k * ldb + j];
        }
        dst[i * ldo + j] = acc;
      }
    }
    return out;
  }

  const bool binary = arity(op) == 2;
  std::span<const T> sb;
  std::size_t ldb = 0;
  if (binary) {
    sb = in[1]->storage<T>();
    ldb = in[1]->padded_cols();
  }
  for (std::size_t i = 0; i < out_shape.rows; ++i) {
    for (std::size_t j = 0; j < out_shape.cols; ++j) {
      T bv = binary ? sb[i * ldb + j] : T{0};
      dst[i * ldo + j] = apply_scalar_map<T>(op, sa[i * lda + j], bv, scalar);
    }
  }
  return out;
}

}  // namespace

Shape result_shape(Opcode op, std::span<const Shape> operands) {
  if (operands.size() != arity(op)) {
    throw ShapeError(std::string(name(op)) + " takes " +
                     std::to_string(arity(op)) + " matrix operand(s), got " +
                     std::to_string(operands.size()));
  }
  if (op == Opcode::MMul) {
    if (operands[0].cols != operands[1].rows) {
      throw ShapeError("MMUL inner dimensions differ: " + dims(operands[0]) +
                       " * " + dims(operands[1]));
    }
    return {operands[0].rows, operands[1].cols};
  }
  if (operands.size() == 2 && operands[0] != operands[1]) {
    throw ShapeError(std::string(name(op)) + " needs equal shapes: " +
                     dims(operands[0]) + " vs " + dims(operands[1]));
  }
  return operands[0];
}

Matrix reference_eval(Opcode op, std::span<const Matrix* const> operands,
                      std::optional<double> scalar) {
  std::vector<Shape> shapes;
  for (const Matrix* m : operands) shapes.push_back(m->shape());
  if (operands.empty()) throw ShapeError("no operands");
  Shape out = result_shape(op, shapes);
  for (const Matrix* m : operands) {
    if (m->precision() != operands[0]->precision() ||
        m->divisor() != operands[0]->divisor()) {
      throw ShapeError("operands differ in precision or divisor");
    }
  }
  if (has_scalar(op) && !scalar) {
    throw ShapeError(std::string(name(op)) + " requires a scalar parameter");
  }
  double s = scalar.value_or(0.0);
  return visit_precision(operands[0]->precision(), [&](auto tag) {
    using T = decltype(tag);
    return eval_typed<T>(op, operands, static_cast<T>(s), out);
  });
}

}  // namespace blockflow
