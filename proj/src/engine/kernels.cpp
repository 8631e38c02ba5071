#include "blockflow/kernels.hpp"

#include <cmath>
#include <string>

#include "blockflow/errors.hpp"

namespace blockflow {

namespace {

template <class T, class F>
void map1(const T* a, T* out, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i]);
}

template <class T, class F>
void map2(const T* a, const T* b, T* out, std::size_t n, F f) {
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

// out = a * b with the i-k-j order: each out element accumulates its
// products in ascending k starting from zero.
template <class T>
void block_product(const T* a, Shape sa, const T* b, Shape sb, T* out) {
  const std::size_t n = sa.rows, inner = sa.cols, m = sb.cols;
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = T{0};
    const T* arow = a + i * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = arow[k];
      const T* brow = b + k * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aik * brow[j];
    }
  }
}

std::string shape_text(Shape s) { return std::to_string(s.rows) + "x" + std::to_string(s.cols); }

}  // namespace

template <class T>
void execute_block_op(Opcode op, std::span<const T* const> operands,
                      std::span<const Shape> shapes, std::optional<T> scalar, T* out,
                      Shape out_shape) {
  if (operands.size() != arity(op) || shapes.size() != operands.size()) {
    throw ShapeError(std::string(name(op)) + " kernel got " + std::to_string(operands.size()) +
                     " operand block(s)");
  }
  if (has_scalar(op) && !scalar) {
    throw ShapeError(std::string(name(op)) + " kernel needs a scalar");
  }
  const T* a = operands[0];
  if (op == Opcode::MMul) {
    if (shapes[0].cols != shapes[1].rows || out_shape.rows != shapes[0].rows ||
        out_shape.cols != shapes[1].cols) {
      throw ShapeError("MMUL kernel: " + shape_text(shapes[0]) + " * " + shape_text(shapes[1]) +
                       " -> " + shape_text(out_shape));
    }
    block_product(a, shapes[0], operands[1], shapes[1], out);
    return;
  }
  for (Shape s : shapes) {
    if (s != out_shape) {
      throw ShapeError(std::string(name(op)) + " kernel: operand " + shape_text(s) +
                       " vs result " + shape_text(out_shape));
    }
  }

  const std::size_t n = out_shape.rows * out_shape.cols;
  const T s = scalar.value_or(T{0});
  const T* b = operands.size() > 1 ? operands[1] : nullptr;
  switch (op) {
    case Opcode::MAdd: map2(a, b, out, n, [](T x, T y) { return x + y; }); break;
    case Opcode::MSub: map2(a, b, out, n, [](T x, T y) { return x - y; }); break;
    case Opcode::EMul: map2(a, b, out, n, [](T x, T y) { return x * y; }); break;
    case Opcode::EDiv: map2(a, b, out, n, [](T x, T y) { return x / y; }); break;
    case Opcode::EPow: map2(a, b, out, n, [](T x, T y) { return std::pow(x, y); }); break;
    case Opcode::Eq: map2(a, b, out, n, [](T x, T y) { return x == y ? T{1} : T{0}; }); break;
    case Opcode::Neq: map2(a, b, out, n, [](T x, T y) { return x != y ? T{1} : T{0}; }); break;
    case Opcode::SAdd: map1(a, out, n, [s](T x) { return x + s; }); break;
    case Opcode::SSub: map1(a, out, n, [s](T x) { return x - s; }); break;
    case Opcode::SMul: map1(a, out, n, [s](T x) { return x * s; }); break;
    case Opcode::Abs: map1(a, out, n, [](T x) { return std::fabs(x); }); break;
    case Opcode::Sin: map1(a, out, n, [](T x) { return std::sin(x); }); break;
    case Opcode::Cos: map1(a, out, n, [](T x) { return std::cos(x); }); break;
    case Opcode::Round: map1(a, out, n, [](T x) { return std::round(x); }); break;
    case Opcode::Mod:
      // Sign follows the divisor; a zero divisor leaves x unchanged.
      map1(a, out, n, [s](T x) { return s == T{0} ? x : x - std::floor(x / s) * s; });
      break;
    case Opcode::Sign:
      map1(a, out, n, [](T x) {
        if (std::isnan(x)) return x;
        return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0});
      });
      break;
    case Opcode::MMul: break;
  }
}

template void execute_block_op<float>(Opcode, std::span<const float* const>,
                                      std::span<const Shape>, std::optional<float>, float*,
                                      Shape);
template void execute_block_op<double>(Opcode, std::span<const double* const>,
                                       std::span<const Shape>, std::optional<double>, double*,
                                       Shape);

Matrix execute_block_op(Opcode op, std::span<const Matrix* const> operands,
                        std::optional<double> scalar) {
  if (operands.empty()) throw ShapeError("no operands");
  const Matrix& first = *operands[0];
  std::vector<Shape> logical;
  for (const Matrix* m : operands) logical.push_back(m->shape());
  Shape out_logical = logical[0];
  Shape out_padded{first.padded_rows(), first.padded_cols()};
  if (op == Opcode::MMul && operands.size() == 2) {
    out_logical = {first.rows(), operands[1]->cols()};
    out_padded = {first.padded_rows(), operands[1]->padded_cols()};
  }
  Matrix out(first.precision(), out_logical.rows, out_logical.cols, first.divisor());
  visit_precision(first.precision(), [&](auto tag) {
    using T = decltype(tag);
    std::vector<const T*> ptrs;
    std::vector<Shape> shapes;
    for (const Matrix* m : operands) {
      if (m->precision() != first.precision()) throw ShapeError("operand precisions differ");
      ptrs.push_back(m->storage<T>().data());
      shapes.push_back({m->padded_rows(), m->padded_cols()});
    }
    std::optional<T> s;
    if (scalar) s = static_cast<T>(*scalar);
    execute_block_op<T>(op, ptrs, shapes, s, out.storage<T>().data(), out_padded);
  });
  out.zero_pads();
  return out;
}

}  // namespace blockflow
