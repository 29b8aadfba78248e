#include "uforge/tensor.hpp"

#include <cmath>

#include "uforge/errors.hpp"

namespace uforge {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw InvalidInputError("Tensor2D: value count does not match rows*cols");
  }
}

bool Tensor2D::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw InvalidInputError("matmul: inner dimensions disagree");
  }
  Tensor2D c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      const double* brow = b.row_ptr(k);
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

Tensor2D matmul_bt(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.cols()) {
    throw InvalidInputError("matmul_bt: inner dimensions disagree");
  }
  Tensor2D c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row_ptr(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += arow[k] * brow[k];
      }
      c.at(i, j) = acc;
    }
  }
  return c;
}

Tensor2D matmul_at(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows()) {
    throw InvalidInputError("matmul_at: inner dimensions disagree");
  }
  Tensor2D c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.row_ptr(k);
    const double* brow = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      double* crow = c.row_ptr(i);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        crow[j] += aki * brow[j];
      }
    }
  }
  return c;
}

}  // namespace uforge
