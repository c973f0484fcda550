#pragma once

#include <vector>

#include "hastcw/matrix.hpp"

namespace hastcw {

struct EigResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are eigenvectors, orthogonal
};

// Symmetric eigendecomposition by cyclic Jacobi rotations.
// A must be square and symmetric within tol (absolute, scaled by max|A|).
EigResult sym_eig(const Matrix& a, double tol = 1e-9);

// W = V diag((lambda_i + eps)^(-1/2)) V^T.  eps <= 0 falls back to 1e-5.
// Throws NumericError if any lambda_i + eps <= 0.
Matrix psd_inverse_sqrt(const Matrix& s, double eps);

// Solve A X = B by Gaussian elimination with partial pivoting.
// Pivot magnitude below 1e-12 throws NumericError.
Matrix solve_linear(const Matrix& a, const Matrix& b);

}  // namespace hastcw
