#include "matweight/matops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double vec_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void normalize(Vec& v) {
  double n = vec_norm(v);
  for (double& x : v) x /= n;
}

}  // namespace

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const Vec& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  require(cols_ == rhs.rows_, "Matrix multiply: inner dimensions differ");
  Matrix out(rows_, rhs.cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int k = 0; k < cols_; ++k) {
      double a = (*this)(r, k);
      if (a == 0.0) continue;
      for (int c = 0; c < rhs.cols_; ++c) out(r, c) += a * rhs(k, c);
    }
  }
  return out;
}

Matrix Matrix::operator+(const Matrix& rhs) const {
  Matrix out = *this;
  out += rhs;
  return out;
}

Matrix Matrix::operator-(const Matrix& rhs) const {
  require(rows_ == rhs.rows_ && cols_ == rhs.cols_, "Matrix subtract: shape mismatch");
  Matrix out = *this;
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] -= rhs.a_[i];
  return out;
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
  require(rows_ == rhs.rows_ && cols_ == rhs.cols_, "Matrix add: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += rhs.a_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Matrix Matrix::scaled(double s) const {
  Matrix out = *this;
  out *= s;
  return out;
}

Vec Matrix::apply(const Vec& x) const {
  require(static_cast<int>(x.size()) == cols_, "Matrix apply: dimension mismatch");
  Vec y(rows_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    const double* row = a_.data() + static_cast<size_t>(r) * cols_;
    for (int c = 0; c < cols_; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec Matrix::apply_transposed(const Vec& x) const {
  require(static_cast<int>(x.size()) == rows_, "Matrix apply_transposed: dimension mismatch");
  Vec y(cols_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = a_.data() + static_cast<size_t>(r) * cols_;
    for (int c = 0; c < cols_; ++c) y[c] += row[c] * xr;
  }
  return y;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double x : a_) s += x * x;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : a_) m = std::max(m, std::fabs(x));
  return m;
}

bool Matrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  double scale = std::max(max_abs(), 1e-300);
  for (int r = 0; r < rows_; ++r)
    for (int c = r + 1; c < cols_; ++c)
      if (std::fabs((*this)(r, c) - (*this)(c, r)) > tol * scale) return false;
  return true;
}

// ---------------------------------------------------------------------------
// cyclic Jacobi
// ---------------------------------------------------------------------------

namespace {

double offdiag_frobenius(const Matrix& a) {
  double s = 0.0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      if (r != c) s += a(r, c) * a(r, c);
  return std::sqrt(s);
}

}  // namespace

Eigh symmetric_eigendecomposition(const Matrix& m) {
  require(m.rows() == m.cols(), "symmetric_eigendecomposition: matrix is not square");
  require(m.is_symmetric(1e-12), "symmetric_eigendecomposition: matrix is not symmetric to 1e-12");

  const int n = m.rows();
  Matrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = 0.5 * (m(r, c) + m(c, r));
  Matrix v = Matrix::identity(n);

  const double scale = std::max(a.frobenius_norm(), 1e-300);
  const double stop = 1e-13 * scale;
  const int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps && offdiag_frobenius(a) > stop; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        double app = a(p, p);
        double aqq = a(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;

        for (int k = 0; k < n; ++k) {
          double akp = a(k, p);
          double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k);
          double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v(k, p);
          double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort ascending; fix each eigenvector's sign so results are reproducible.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  Eigh out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    int src = order[j];
    out.values[j] = a(src, src);
    int pivot = 0;
    for (int k = 0; k < n; ++k)
      if (std::fabs(v(k, src)) > std::fabs(v(pivot, src))) pivot = k;
    double sign = v(pivot, src) < 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < n; ++k) out.vectors(k, j) = sign * v(k, src);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PSD transforms
// ---------------------------------------------------------------------------

namespace {

Matrix eig_rebuild(const Eigh& e, const std::function<double(double)>& f) {
  const int n = static_cast<int>(e.values.size());
  Matrix out(n, n);
  for (int j = 0; j < n; ++j) {
    double fj = f(e.values[j]);
    if (fj == 0.0) continue;
    for (int r = 0; r < n; ++r) {
      double vr = e.vectors(r, j) * fj;
      if (vr == 0.0) continue;
      for (int c = 0; c < n; ++c) out(r, c) += vr * e.vectors(c, j);
    }
  }
  // The rebuild is symmetric in exact arithmetic; enforce it bitwise.
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) {
      double avg = 0.5 * (out(r, c) + out(c, r));
      out(r, c) = avg;
      out(c, r) = avg;
    }
  return out;
}

double spectral_scale(const Eigh& e) {
  double m = 0.0;
  for (double v : e.values) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

Matrix psd_sqrt(const Matrix& m) {
  Eigh e = symmetric_eigendecomposition(m);
  double scale = std::max(spectral_scale(e), 1e-300);
  for (double& v : e.values) {
    if (v < -1e-10 * scale)
      throw std::invalid_argument("psd_sqrt: eigenvalue " + std::to_string(v) +
                                  " is negative beyond tolerance");
    if (v < 0.0) v = 0.0;
  }
  return eig_rebuild(e, [](double v) { return std::sqrt(v); });
}

Matrix psd_inv_sqrt(const Matrix& m) {
  Eigh e = symmetric_eigendecomposition(m);
  double scale = std::max(spectral_scale(e), 1e-300);
  for (double v : e.values) {
    if (v <= 1e-12 * scale)
      throw std::invalid_argument("psd_inv_sqrt: eigenvalue " + std::to_string(v) +
                                  " is too small relative to the spectral norm");
  }
  return eig_rebuild(e, [](double v) { return 1.0 / std::sqrt(v); });
}

double psd_logdet(const Matrix& m) {
  Eigh e = symmetric_eigendecomposition(m);
  double scale = std::max(spectral_scale(e), 1e-300);
  double s = 0.0;
  for (double v : e.values) {
    if (v <= 1e-12 * scale)
      throw std::invalid_argument("psd_logdet: eigenvalue " + std::to_string(v) +
                                  " is too small relative to the spectral norm");
    s += std::log(v);
  }
  return s;
}

double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  if (m.rows() == m.cols() && m.is_symmetric(1e-12)) {
    Eigh e = symmetric_eigendecomposition(m);
    return spectral_scale(e);
  }
  // General rectangular: largest eigenvalue of the (symmetric) Gram matrix.
  Matrix gram = m.transposed() * m;
  Eigh e = symmetric_eigendecomposition(gram);
  double top = e.values.empty() ? 0.0 : e.values.back();
  return std::sqrt(std::max(top, 0.0));
}

double condition_number(const Matrix& m) {
  Eigh e = symmetric_eigendecomposition(m);
  double lo = e.values.front();
  double hi = e.values.back();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// ---------------------------------------------------------------------------
// power iteration
// ---------------------------------------------------------------------------

namespace {

void probe_linearity(const LinearMap& apply, int dim_in) {
  Rng rng(0x9e3779b97f4a7c15ULL);
  Vec x(dim_in), y(dim_in);
  for (int i = 0; i < dim_in; ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal();
  }
  const double alpha = 0.6180339887498949;
  const double beta = -1.3247179572447458;
  Vec combo(dim_in);
  for (int i = 0; i < dim_in; ++i) combo[i] = alpha * x[i] + beta * y[i];
  Vec lhs = apply(combo);
  Vec ax = apply(x);
  Vec ay = apply(y);
  double err = 0.0, scale = 0.0;
  for (size_t i = 0; i < lhs.size(); ++i) {
    double rhs = alpha * ax[i] + beta * ay[i];
    err = std::max(err, std::fabs(lhs[i] - rhs));
    scale = std::max({scale, std::fabs(lhs[i]), std::fabs(rhs)});
  }
  if (err > 1e-8 * std::max(scale, 1.0))
    throw std::invalid_argument("largest_singular_value: map failed the linearity probe");
}

}  // namespace

double largest_singular_value(const LinearMap& apply, const LinearMap& apply_transposed,
                              int dim_in, int dim_out) {
  require(dim_in > 0 && dim_out > 0, "largest_singular_value: dimensions must be positive");
  probe_linearity(apply, dim_in);

  const double tol = 1e-9;
  const int max_iters = 10000;

  Vec v(dim_in, 1.0 / std::sqrt(static_cast<double>(dim_in)));
  double sigma_prev = -1.0;
  double sigma = 0.0;
  bool restarted = false;

  for (int iter = 0; iter < max_iters; ++iter) {
    Vec w = apply(v);
    if (static_cast<int>(w.size()) != dim_out)
      throw std::invalid_argument("largest_singular_value: map output has wrong dimension");
    sigma = vec_norm(w);
    if (sigma == 0.0) {
      if (restarted) return 0.0;
      // The start vector may sit in the kernel; try once from a random one.
      restarted = true;
      Rng rng(0xd1b54a32d192ed03ULL);
      for (double& x : v) x = rng.normal();
      normalize(v);
      sigma_prev = -1.0;
      continue;
    }
    Vec u = apply_transposed(w);
    double nu = vec_norm(u);
    if (nu == 0.0) return sigma;
    for (size_t i = 0; i < u.size(); ++i) u[i] /= nu;
    v = std::move(u);

    if (sigma_prev >= 0.0 && std::fabs(sigma - sigma_prev) <= tol * std::max(sigma, 1e-300))
      return sigma;
    sigma_prev = sigma;

    if (iter == max_iters - 1 && !restarted) {
      restarted = true;
      Rng rng(0xd1b54a32d192ed03ULL);
      for (double& x : v) x = rng.normal();
      normalize(v);
      sigma_prev = -1.0;
      iter = -1;  // restart the loop budget once
    }
  }

  throw ConvergenceError(
      "largest_singular_value: power iteration did not converge within 10000 iterations "
      "(last estimate " + std::to_string(sigma) + ")",
      v, std::fabs(sigma - sigma_prev));
}

double largest_singular_value(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return largest_singular_value(
      [&m](const Vec& x) { return m.apply(x); },
      [&m](const Vec& x) { return m.apply_transposed(x); },
      m.cols(), m.rows());
}

}  // namespace matweight
