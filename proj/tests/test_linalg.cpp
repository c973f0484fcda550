#include <doctest.h>

#include <cmath>

#include "hastcw/errors.hpp"
#include "hastcw/linalg.hpp"

using namespace hastcw;

namespace {

Matrix reconstruct(const EigResult& eig) {
  size_t n = eig.values.size();
  Matrix lam(n, n);
  for (size_t i = 0; i < n; ++i) lam(i, i) = eig.values[i];
  return multiply(multiply(eig.vectors, lam), transpose(eig.vectors));
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("sym_eig identity") {
  EigResult eig = sym_eig(Matrix::identity(3));
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(orthogonality_residual(eig.vectors) < 1e-12);
}

TEST_CASE("sym_eig diagonal") {
  Matrix a(2, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 2.0;
  EigResult eig = sym_eig(a);
  CHECK(eig.values[0] == doctest::Approx(3.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  // columns are +-e0, +-e1
  CHECK(std::abs(eig.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(eig.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig 2x2 hand-solved characteristic polynomial") {
  // [[2,1],[1,2]]: det(A - tI) = (2-t)^2 - 1 -> t = 3, 1
  Matrix a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 2;
  EigResult eig = sym_eig(a);
  CHECK(eig.values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(eig.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(eig.vectors(0, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(std::abs(eig.vectors(1, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(eig.vectors(0, 0) * eig.vectors(1, 0) > 0);  // same sign: (1,1) direction
  CHECK(eig.vectors(0, 1) * eig.vectors(1, 1) < 0);  // (1,-1) direction
}

TEST_CASE("sym_eig reconstruction and orthogonality on random matrices") {
  SeededRng rng(101);
  for (size_t n : {2, 5, 16, 33, 64}) {
    Matrix a = random_symmetric(n, rng);
    EigResult eig = sym_eig(a);
    double scale = std::max(1.0, max_abs(a));
    CHECK(max_abs(subtract(reconstruct(eig), a)) <= 1e-10 * scale);
    CHECK(orthogonality_residual(eig.vectors) <= 1e-10);
    for (size_t i = 1; i < n; ++i) CHECK(eig.values[i - 1] >= eig.values[i]);
  }
}

TEST_CASE("sym_eig rejects bad input") {
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), ValidationError);
  Matrix asym(2, 2);
  asym(0, 1) = 1.0;
  asym(1, 0) = 0.5;
  CHECK_THROWS_AS(sym_eig(asym), ValidationError);
}

TEST_CASE("psd_inverse_sqrt identity with default eps") {
  Matrix w = psd_inverse_sqrt(Matrix::identity(3), 0.0);  // eps 0 -> 1e-5 default
  CHECK(max_abs(subtract(w, Matrix::identity(3))) < 1e-5);
}

TEST_CASE("psd_inverse_sqrt diagonal") {
  Matrix s(2, 2);
  s(0, 0) = 4.0;
  s(1, 1) = 1.0;
  Matrix w = psd_inverse_sqrt(s, 0.0);
  CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(w(1, 1) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(w(0, 1)) < 1e-12);
}

TEST_CASE("psd_inverse_sqrt whitens by explicit multiplication") {
  Matrix s(2, 2);
  s(0, 0) = 2;
  s(0, 1) = 1;
  s(1, 0) = 1;
  s(1, 1) = 2;
  double eps = 1e-5;
  Matrix w = psd_inverse_sqrt(s, eps);
  // exact contract: W (S + eps I) W = I
  Matrix shifted = s;
  shifted(0, 0) += eps;
  shifted(1, 1) += eps;
  CHECK(max_abs(subtract(multiply(multiply(w, shifted), w), Matrix::identity(2))) <= 1e-8);
  // and W S W is the identity up to the regularizer
  CHECK(max_abs(subtract(multiply(multiply(w, s), w), Matrix::identity(2))) <= 5e-5);
}

TEST_CASE("psd_inverse_sqrt properties on random PSD matrices") {
  SeededRng rng(55);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix b = random_matrix(8, 8, rng);
    Matrix s = multiply(b, transpose(b));  // PSD
    Matrix w = psd_inverse_sqrt(s, 1e-6);
    CHECK(asymmetry(w) <= 1e-12);
    Matrix shifted = s;
    for (size_t i = 0; i < 8; ++i) shifted(i, i) += 1e-6;
    CHECK(max_abs(subtract(multiply(w, shifted), multiply(shifted, w))) <= 1e-8);
    CHECK(max_abs(subtract(multiply(multiply(w, shifted), w), Matrix::identity(8))) <= 1e-8);
  }
}

TEST_CASE("psd_inverse_sqrt rejects indefinite input") {
  Matrix s(2, 2);
  s(0, 0) = -1.0;
  s(1, 1) = 1.0;
  CHECK_THROWS_AS(psd_inverse_sqrt(s, 0.5), NumericError);
}

TEST_CASE("solve_linear trivial cases") {
  SeededRng rng(3);
  Matrix b = random_matrix(3, 2, rng);
  Matrix x = solve_linear(Matrix::identity(3), b);
  CHECK(max_abs(subtract(x, b)) == 0.0);

  Matrix a(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 4.0;
  Matrix x2 = solve_linear(a, Matrix::identity(2));
  CHECK(x2(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(x2(1, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("solve_linear residual on well-conditioned random systems") {
  SeededRng rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix a = random_matrix(5, 5, rng);
    for (size_t i = 0; i < 5; ++i) a(i, i) += 5.0;  // diagonally dominant
    Matrix b = random_matrix(5, 3, rng);
    Matrix x = solve_linear(a, b);
    double norm_b = std::max(1.0, max_abs(b));
    CHECK(max_abs(subtract(multiply(a, x), b)) <= 1e-9 * norm_b);
  }
}

TEST_CASE("solve_linear rejects singular systems") {
  Matrix zero(3, 3);
  CHECK_THROWS_AS(solve_linear(zero, Matrix::identity(3)), NumericError);
  Matrix rank1(2, 2);
  rank1(0, 0) = 1;
  rank1(0, 1) = 2;
  rank1(1, 0) = 2;
  rank1(1, 1) = 4;
  CHECK_THROWS_AS(solve_linear(rank1, Matrix::identity(2)), NumericError);
}

TEST_CASE("solve then multiply is the identity map") {
  SeededRng rng(13);
  Matrix a = random_matrix(6, 6, rng);
  for (size_t i = 0; i < 6; ++i) a(i, i) += 6.0;
  Matrix b = random_matrix(6, 6, rng);
  Matrix x = solve_linear(a, multiply(a, b));
  CHECK(max_abs(subtract(x, b)) <= 1e-9);
}

}  // TEST_SUITE
