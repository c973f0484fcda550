#include "hastcw/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hastcw/errors.hpp"

namespace hastcw {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult sym_eig(const Matrix& input, double tol) {
  if (input.rows() != input.cols()) throw ValidationError("sym_eig: matrix not square");
  size_t n = input.rows();
  if (n == 0) throw ValidationError("sym_eig: empty matrix");
  double scale = std::max(1.0, max_abs(input));
  if (asymmetry(input) > tol * scale) throw ValidationError("sym_eig: matrix not symmetric within tolerance");

  Matrix a = input;
  // enforce exact symmetry so rotations see a consistent matrix
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 100;
  const double conv = 1e-15 * std::max(frobenius_norm(a), 1e-300);
  int sweep = 0;
  while (off_diagonal_norm(a) > conv) {
    if (++sweep > max_sweeps) throw NumericError("sym_eig: Jacobi iteration did not converge");
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);
        double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            double arp = a(r, p), arq = a(r, q);
            a(r, p) = arp - s * (arq + tau * arp);
            a(p, r) = a(r, p);
            a(r, q) = arq + s * (arp - tau * arq);
            a(q, r) = a(r, q);
          }
          double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t i, size_t j) { return a(i, i) > a(j, j); });

  EigResult out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

Matrix psd_inverse_sqrt(const Matrix& s, double eps) {
  if (eps <= 0.0) eps = 1e-5;
  EigResult eig = sym_eig(s, 1e-8);
  size_t n = s.rows();
  Matrix w(n, n);
  std::vector<double> inv_sqrt(n);
  for (size_t i = 0; i < n; ++i) {
    double shifted = eig.values[i] + eps;
    if (shifted <= 0.0) throw NumericError("psd_inverse_sqrt: eigenvalue + eps not positive");
    inv_sqrt[i] = 1.0 / std::sqrt(shifted);
  }
  // W = V diag(inv_sqrt) V^T, filled symmetric
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < n; ++k) acc += eig.vectors(i, k) * inv_sqrt[k] * eig.vectors(j, k);
      w(i, j) = acc;
      w(j, i) = acc;
    }
  }
  return w;
}

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) throw ValidationError("solve_linear: matrix not square");
  if (a.rows() != b.rows()) throw ValidationError("solve_linear: rhs row count mismatch");
  size_t n = a.rows(), m = b.cols();
  Matrix lu = a;
  Matrix x = b;
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::fabs(lu(r, col)) > std::fabs(lu(piv, col))) piv = r;
    if (std::fabs(lu(piv, col)) < 1e-12) throw NumericError("solve_linear: matrix is singular");
    if (piv != col) {
      for (size_t c = 0; c < n; ++c) std::swap(lu(col, c), lu(piv, c));
      for (size_t c = 0; c < m; ++c) std::swap(x(col, c), x(piv, c));
    }
    double d = lu(col, col);
    for (size_t r = col + 1; r < n; ++r) {
      double f = lu(r, col) / d;
      if (f == 0.0) continue;
      for (size_t c = col; c < n; ++c) lu(r, c) -= f * lu(col, c);
      for (size_t c = 0; c < m; ++c) x(r, c) -= f * x(col, c);
    }
  }
  for (size_t col = n; col-- > 0;) {
    double d = lu(col, col);
    for (size_t c = 0; c < m; ++c) {
      double acc = x(col, c);
      for (size_t k = col + 1; k < n; ++k) acc -= lu(col, k) * x(k, c);
      x(col, c) = acc / d;
    }
  }
  return x;
}

}  // namespace hastcw
