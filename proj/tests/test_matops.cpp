#include <doctest.h>

#include <cmath>

#include <matweight/matops.hpp>
#include <matweight/rng.hpp>

#include "oracles.hpp"

using namespace matweight;

namespace {

Matrix random_psd(Rng& rng, int n) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  Matrix m = a.transposed() * a + Matrix::identity(n).scaled(0.05);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double s = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = s;
      m(j, i) = s;
    }
  return m;
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = rng.uniform(-2.0, 2.0);
  return a;
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v = std::max(v, std::abs(m(i, j)));
  return v;
}

}  // namespace

TEST_SUITE("matops") {

TEST_CASE("psd_sqrt on identity and diagonal") {
  CHECK(max_abs(psd_sqrt(Matrix::identity(3)) - Matrix::identity(3)) <= 1e-14);
  const Matrix s = psd_sqrt(Matrix::diagonal({4.0, 9.0}));
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(s(0, 1)) <= 1e-12);
}

TEST_CASE("psd_sqrt multiply-back on random matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(4));
    const Matrix m = random_psd(rng, n);
    const Matrix s = psd_sqrt(m);
    CHECK(spectral_norm(s * s - m) <= 1e-9 * std::max(1.0, spectral_norm(m)));
  }
}

TEST_CASE("psd_sqrt clamps tiny negatives and rejects real ones") {
  Matrix tiny = Matrix::diagonal({1.0, -1e-14});
  CHECK_NOTHROW(psd_sqrt(tiny));
  Matrix bad = Matrix::diagonal({1.0, -1e-3});
  CHECK_THROWS(psd_sqrt(bad));
}

TEST_CASE("spectral_norm basics") {
  CHECK(spectral_norm(Matrix::diagonal({3.0, 1.0})) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(spectral_norm(Matrix(4, 4)) == 0.0);
}

TEST_CASE("spectral_norm matches full SVD on random 8x8") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 8, 8);
    const double expected = oracle::svd_largest(a);
    CHECK(spectral_norm(a) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("spectral_norm of A^T A is the square") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 6, 4);
    const double n = spectral_norm(a);
    CHECK(spectral_norm(a.transposed() * a) == doctest::Approx(n * n).epsilon(1e-9));
  }
}

TEST_CASE("largest_singular_value on simple maps") {
  auto id = [](const Vec& x) { return x; };
  CHECK(largest_singular_value(id, id, 5, 5) == doctest::Approx(1.0).epsilon(1e-9));
  auto twice = [](const Vec& x) {
    Vec y = x;
    for (double& v : y) v *= 2.0;
    return y;
  };
  CHECK(largest_singular_value(twice, twice, 3, 3) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("largest_singular_value matches dense SVD on random 50x50") {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_matrix(rng, 50, 50);
    const double expected = oracle::svd_largest(a);
    CHECK(largest_singular_value(a) == doctest::Approx(expected).epsilon(1e-7));
  }
}

TEST_CASE("logdet and inverse square root") {
  CHECK(psd_logdet(Matrix::identity(4)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(max_abs(psd_inv_sqrt(Matrix::identity(4)) - Matrix::identity(4)) <= 1e-14);
  CHECK(psd_logdet(Matrix::diagonal({4.0, 0.25})) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(4));
    const Matrix m = random_psd(rng, n);
    const double expected = oracle::det_cofactor(m);
    CHECK(std::exp(psd_logdet(m)) == doctest::Approx(expected).epsilon(1e-9));
    const Matrix r = psd_inv_sqrt(m);
    CHECK(spectral_norm(r * m * r - Matrix::identity(n)) <= 1e-9);
  }
}

TEST_CASE("psd_inv_sqrt rejects singular input") {
  CHECK_THROWS(psd_inv_sqrt(Matrix::diagonal({1.0, 0.0})));
  CHECK_THROWS(psd_logdet(Matrix::diagonal({1.0, 0.0})));
}

TEST_CASE("logdet is additive on commuting pairs") {
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_psd(rng, 3);
    const Eigh eigh = symmetric_eigendecomposition(m);
    Matrix q = eigh.vectors;
    Matrix a(3, 3), b(3, 3);
    Vec da(3), db(3);
    for (int i = 0; i < 3; ++i) {
      da[static_cast<size_t>(i)] = rng.uniform(0.2, 3.0);
      db[static_cast<size_t>(i)] = rng.uniform(0.2, 3.0);
    }
    a = q * Matrix::diagonal(da) * q.transposed();
    b = q * Matrix::diagonal(db) * q.transposed();
    for (Matrix* m2 : {&a, &b})
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          const double s = 0.5 * ((*m2)(i, j) + (*m2)(j, i));
          (*m2)(i, j) = s;
          (*m2)(j, i) = s;
        }
    CHECK(psd_logdet(a * b) ==
          doctest::Approx(psd_logdet(a) + psd_logdet(b)).epsilon(1e-9));
  }
}

TEST_CASE("symmetric eigendecomposition reconstructs") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(5));
    const Matrix m = random_psd(rng, n);
    const Eigh eigh = symmetric_eigendecomposition(m);
    const Matrix rebuilt =
        eigh.vectors * Matrix::diagonal(eigh.values) * eigh.vectors.transposed();
    CHECK(max_abs(rebuilt - m) <= 1e-10 * std::max(1.0, max_abs(m)));
    CHECK(max_abs(eigh.vectors.transposed() * eigh.vectors - Matrix::identity(n)) <= 1e-10);
    for (size_t i = 1; i < eigh.values.size(); ++i) CHECK(eigh.values[i - 1] <= eigh.values[i]);
  }
}

}  // TEST_SUITE
