#pragma once

#include <cstddef>
#include <vector>

namespace uforge {

/// Dense row-major matrix of doubles. The carrier for every vector and
/// matrix in the library; a row vector is a 1xN tensor.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  const double* row_ptr(std::size_t r) const { return values_.data() + r * cols_; }
  double* row_ptr(std::size_t r) { return values_.data() + r * cols_; }

  bool same_shape(const Tensor2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// True iff every entry is finite.
  bool all_finite() const;

  bool operator==(const Tensor2D& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// c = a * b. Shapes must align.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

/// c = a * b^T.
Tensor2D matmul_bt(const Tensor2D& a, const Tensor2D& b);

/// c = a^T * b.
Tensor2D matmul_at(const Tensor2D& a, const Tensor2D& b);

}  // namespace uforge
