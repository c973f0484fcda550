#pragma once

#include <cstddef>
#include <vector>

#include "hastcw/rng.hpp"

namespace hastcw {

// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(size_t n);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

double max_abs(const Matrix& a);
double frobenius_norm(const Matrix& a);
// max |A - A^T| entry.
double asymmetry(const Matrix& a);
// max |Q^T Q - I| entry.
double orthogonality_residual(const Matrix& q);
bool all_finite(const Matrix& a);

Matrix random_matrix(size_t rows, size_t cols, SeededRng& rng, double lo = -1.0, double hi = 1.0);
Matrix random_symmetric(size_t n, SeededRng& rng);

}  // namespace hastcw
