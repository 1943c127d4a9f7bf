#pragma once

// Matrix weights: symmetric positive definite matrices attached to the leaf
// cells of a grid, with exact interval averages and serialization.

#include <cstdint>
#include <string>
#include <vector>

#include "matweight/dyadic.hpp"
#include "matweight/matops.hpp"

namespace matweight {

class MatrixWeight {
 public:
  // Validates shape and positivity of every cell matrix.
  MatrixWeight(Grid grid, int dim, std::vector<Matrix> cells);

  const Grid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const Matrix& cell(std::int64_t i) const { return cells_[static_cast<size_t>(i)]; }
  const std::vector<Matrix>& cells() const { return cells_; }

  // Average of the weight over a dyadic interval of the owning grid; exact
  // (prefix sums over the member cells).
  Matrix average(DyadicInterval i) const;

  // Average of log det W over an interval; used by the determinant condition.
  double average_logdet(DyadicInterval i) const;

  // Cellwise inverse. Rejects cells whose condition number exceeds 1e12,
  // naming the offending cell.
  MatrixWeight inverse() const;

  std::string to_json() const;
  static MatrixWeight from_json(const std::string& text);

 private:
  Grid grid_;
  int dim_;
  std::vector<Matrix> cells_;
  std::vector<Matrix> prefix_;      // prefix_[i] = sum of cells_[0..i)
  std::vector<double> logdet_prefix_;
};

// sqrt( sum over cells of |cell| * <W(cell) f(cell), f(cell)> ).
double weighted_norm(const Field& f, const MatrixWeight& w);

enum class WeightKind {
  constant,
  two_value,
  scalar_power,
  rotating,
  random_logbounded,
};

struct WeightSpec {
  WeightKind kind = WeightKind::constant;

  Matrix constant_matrix;  // constant: empty means the identity

  double a = 1.0;  // two_value: scalar value on the left half of the window
  double b = 1.0;  // two_value: scalar value on the right half

  double alpha = 0.0;  // scalar_power: midpoint^alpha times the identity

  double theta0 = 0.0;        // rotating: eigenbasis angle at the window start
  double theta_rate = 0.0;    // rotating: angle swept across the window
  double eccentricity = 1.0;  // rotating: second eigenvalue

  double cond_max = 1.0;  // random_logbounded: eigenvalue range [1/cond_max, cond_max]
};

// Deterministic in (spec, dim, grid, seed). Scalar kinds embed as multiples
// of the identity, so any dimension is accepted; rotating needs dim >= 2.
MatrixWeight generate_weight(const WeightSpec& spec, int dim, const Grid& grid,
                             std::uint64_t seed);

const char* weight_kind_name(WeightKind kind);

}  // namespace matweight
