#include "blockflow/matrix.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

#include "blockflow/errors.hpp"

namespace blockflow {

std::pair<std::size_t, std::size_t> pad_dims(std::int64_t n, std::int64_t m,
                                             std::int64_t divisor) {
  if (n < 1 || m < 1) {
    throw std::invalid_argument("matrix dimensions must be positive, got " +
                                std::to_string(n) + "x" + std::to_string(m));
  }
  if (divisor < 1) {
    throw std::invalid_argument("divisor must be positive, got " +
                                std::to_string(divisor));
  }
  auto up = [divisor](std::int64_t v) {
    return static_cast<std::size_t>((v + divisor - 1) / divisor * divisor);
  };
  return {up(n), up(m)};
}

Matrix::Matrix(Precision precision, std::size_t rows, std::size_t cols,
               std::size_t divisor)
    : rows_(rows), cols_(cols), divisor_(divisor) {
  auto [pr, pc] = pad_dims(static_cast<std::int64_t>(rows),
                           static_cast<std::int64_t>(cols),
                           static_cast<std::int64_t>(divisor));
  padded_rows_ = pr;
  padded_cols_ = pc;
  if (precision == Precision::Single) {
    data_ = std::vector<float>(pr * pc, 0.0f);
  } else {
    data_ = std::vector<double>(pr * pc, 0.0);
  }
}

double Matrix::at(std::size_t r, std::size_t c) const {
  if (r >= padded_rows_ || c >= padded_cols_) {
    throw std::out_of_range("matrix index out of range");
  }
  return std::visit(
      [&](const auto& v) { return static_cast<double>(v[r * padded_cols_ + c]); },
      data_);
}

void Matrix::set(std::size_t r, std::size_t c, double value) {
  if (r >= rows_ || c >= cols_) {
    throw std::out_of_range("matrix index out of logical range");
  }
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v[r * padded_cols_ + c] = static_cast<T>(value);
      },
      data_);
}

std::vector<double> Matrix::logical_values() const {
  std::vector<double> out;
  out.reserve(rows_ * cols_);
  std::visit(
      [&](const auto& v) {
        for (std::size_t r = 0; r < rows_; ++r) {
          for (std::size_t c = 0; c < cols_; ++c) {
            out.push_back(static_cast<double>(v[r * padded_cols_ + c]));
          }
        }
      },
      data_);
  return out;
}

bool Matrix::contains(const BlockView& view) const noexcept {
  return view.row_start + view.row_count <= padded_rows_ &&
         view.col_start + view.col_count <= padded_cols_;
}

bool Matrix::pads_are_zero() const {
  return std::visit(
      [&](const auto& v) {
        for (std::size_t r = 0; r < padded_rows_; ++r) {
          for (std::size_t c = 0; c < padded_cols_; ++c) {
            if ((r >= rows_ || c >= cols_) && v[r * padded_cols_ + c] != 0) {
              return false;
            }
          }
        }
        return true;
      },
      data_);
}

void Matrix::zero_pads() {
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (std::size_t r = 0; r < padded_rows_; ++r) {
          std::size_t first = r < rows_ ? cols_ : 0;
          std::fill(v.begin() + static_cast<std::ptrdiff_t>(r * padded_cols_ + first),
                    v.begin() + static_cast<std::ptrdiff_t>((r + 1) * padded_cols_),
                    T{0});
        }
      },
      data_);
}

bool operator==(const Matrix& a, const Matrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.divisor_ != b.divisor_ ||
      a.data_.index() != b.data_.index()) {
    return false;
  }
  return std::visit(
      [&](const auto& va) {
        using V = std::decay_t<decltype(va)>;
        const auto& vb = std::get<V>(b.data_);
        return va.size() == vb.size() &&
               std::memcmp(va.data(), vb.data(),
                           va.size() * sizeof(typename V::value_type)) == 0;
      },
      a.data_);
}

Matrix make_matrix(Precision precision, std::size_t n, std::size_t m,
                   std::size_t divisor, std::span<const double> elements) {
  if (elements.size() != n * m) {
    throw ShapeError("expected " + std::to_string(n * m) +
                     " elements for a " + std::to_string(n) + "x" +
                     std::to_string(m) + " matrix, got " +
                     std::to_string(elements.size()));
  }
  Matrix out(precision, n, m, divisor);
  visit_precision(precision, [&](auto tag) {
    using T = decltype(tag);
    auto dst = out.storage<T>();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        dst[r * out.padded_cols() + c] = static_cast<T>(elements[r * m + c]);
      }
    }
  });
  return out;
}

}  // namespace blockflow
