#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "blockflow/precision.hpp"

namespace blockflow {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Smallest multiples of `divisor` that are >= n and >= m.
/// Throws std::invalid_argument for non-positive arguments.
std::pair<std::size_t, std::size_t> pad_dims(std::int64_t n, std::int64_t m,
                                             std::int64_t divisor);

/// Rectangular region of a matrix's padded storage, in elements.
struct BlockView {
  std::size_t row_start = 0;
  std::size_t row_count = 0;
  std::size_t col_start = 0;
  std::size_t col_count = 0;

  friend bool operator==(const BlockView&, const BlockView&) = default;
};

/// Dense row-major matrix whose storage is padded with zeros up to the next
/// multiple of the divisor in both dimensions.
class Matrix {
 public:
  Matrix() = default;

  /// Zero matrix with logical shape rows x cols.
  Matrix(Precision precision, std::size_t rows, std::size_t cols,
         std::size_t divisor);

  Precision precision() const noexcept {
    return data_.index() == 0 ? Precision::Single : Precision::Double;
  }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Shape shape() const noexcept { return {rows_, cols_}; }
  std::size_t padded_rows() const noexcept { return padded_rows_; }
  std::size_t padded_cols() const noexcept { return padded_cols_; }
  std::size_t divisor() const noexcept { return divisor_; }

  /// Padded row-major storage; T must match precision().
  template <class T>
  std::span<T> storage() {
    return std::get<std::vector<T>>(data_);
  }
  template <class T>
  std::span<const T> storage() const {
    return std::get<std::vector<T>>(data_);
  }

  double at(std::size_t r, std::size_t c) const;
  void set(std::size_t r, std::size_t c, double value);

  /// Logical elements in row-major order, widened to double.
  std::vector<double> logical_values() const;

  bool contains(const BlockView& view) const noexcept;

  /// True when every storage cell outside the logical region is +0 or -0.
  bool pads_are_zero() const;
  void zero_pads();

  /// Bitwise equality of precision, shape, divisor and storage.
  friend bool operator==(const Matrix& a, const Matrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t padded_rows_ = 0;
  std::size_t padded_cols_ = 0;
  std::size_t divisor_ = 1;
  std::variant<std::vector<float>, std::vector<double>> data_;
};

/// Builds a padded matrix from n*m row-major values.
/// Throws ShapeError when the element count does not match.
Matrix make_matrix(Precision precision, std::size_t n, std::size_t m,
                   std::size_t divisor, std::span<const double> elements);

}  // namespace blockflow
