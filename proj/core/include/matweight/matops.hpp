#pragma once

// Dense linear algebra for small symmetric matrices and assembled operators.
// Everything here is deterministic: the eigensolver is cyclic Jacobi, the
// singular-value estimator is power iteration with a fixed start vector.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace matweight {

using Vec = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
  }

  static Matrix identity(int n);
  static Matrix diagonal(const Vec& d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return a_[static_cast<size_t>(r) * cols_ + c]; }

  const Vec& data() const { return a_; }

  Matrix transposed() const;
  Matrix operator*(const Matrix& rhs) const;
  Matrix operator+(const Matrix& rhs) const;
  Matrix operator-(const Matrix& rhs) const;
  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator*=(double s);
  Matrix scaled(double s) const;

  Vec apply(const Vec& x) const;             // A x
  Vec apply_transposed(const Vec& x) const;  // A^T x

  double frobenius_norm() const;
  double max_abs() const;
  bool is_symmetric(double tol) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vec a_;
};

// Eigendecomposition of a real symmetric matrix: values ascending,
// eigenvectors as matching columns of an orthogonal matrix.
struct Eigh {
  Vec values;
  Matrix vectors;
};

// Cyclic Jacobi rotations; sweeps until the off-diagonal Frobenius mass drops
// below 1e-13 relative to the input scale. Input must be symmetric to 1e-12
// (relative); it is symmetrized before iterating.
Eigh symmetric_eigendecomposition(const Matrix& m);

// Symmetric PSD square root. Eigenvalues in [-1e-10, 0) (relative to the
// spectral norm) are clamped to zero; anything lower is an error.
Matrix psd_sqrt(const Matrix& m);

// Inverse square root of a positive definite matrix. Eigenvalues at or below
// 1e-12 relative to the spectral norm are rejected.
Matrix psd_inv_sqrt(const Matrix& m);

// log(det M) for positive definite M, summed over log-eigenvalues so that
// large determinants stay in range.
double psd_logdet(const Matrix& m);

// Largest singular value. Symmetric inputs take the direct eigenvalue route;
// general inputs go through the eigendecomposition of A^T A.
double spectral_norm(const Matrix& m);

// Ratio of extreme eigenvalues of a positive definite matrix.
double condition_number(const Matrix& m);

// Thrown when power iteration fails to settle; carries the last iterate so a
// caller can inspect what the estimate was doing.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Vec last_iterate, double residual)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const Vec& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  Vec last_iterate_;
  double residual_;
};

using LinearMap = std::function<Vec(const Vec&)>;

// Power iteration on A^T A from the normalized all-ones vector: relative
// tolerance 1e-9 on the singular-value estimate, at most 10000 iterations,
// one seeded random restart before giving up. The map is probed once for
// linearity on random inputs. Reliable when the top two singular values are
// separated by at least ~1e-6 relative.
double largest_singular_value(const LinearMap& apply, const LinearMap& apply_transposed,
                              int dim_in, int dim_out);

double largest_singular_value(const Matrix& m);

}  // namespace matweight
