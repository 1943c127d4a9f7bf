#include "matweight/weights.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

MatrixWeight::MatrixWeight(Grid grid, int dim, std::vector<Matrix> cells)
    : grid_(grid), dim_(dim), cells_(std::move(cells)) {
  require(dim >= 1, "MatrixWeight: dimension must be positive");
  require(static_cast<std::int64_t>(cells_.size()) == grid_.num_cells(),
          "MatrixWeight: expected one matrix per leaf cell");

  prefix_.reserve(cells_.size() + 1);
  logdet_prefix_.reserve(cells_.size() + 1);
  prefix_.push_back(Matrix(dim_, dim_));
  logdet_prefix_.push_back(0.0);

  for (size_t i = 0; i < cells_.size(); ++i) {
    const Matrix& c = cells_[i];
    require(c.rows() == dim_ && c.cols() == dim_,
            "MatrixWeight: cell " + std::to_string(i) + " has the wrong shape");
    require(c.is_symmetric(1e-12),
            "MatrixWeight: cell " + std::to_string(i) + " is not symmetric");
    double ld;
    try {
      ld = psd_logdet(c);  // also rejects non-positive cells
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("MatrixWeight: cell " + std::to_string(i) +
                                  " is not positive definite");
    }
    prefix_.push_back(prefix_.back() + c);
    logdet_prefix_.push_back(logdet_prefix_.back() + ld);
  }
}

Matrix MatrixWeight::average(DyadicInterval i) const {
  require(grid_.contains(i), "MatrixWeight::average: interval (level " +
                                 std::to_string(i.level) + ", index " + std::to_string(i.index) +
                                 ") is outside the window");
  std::int64_t begin = grid_.cells_begin(i);
  std::int64_t end = grid_.cells_end(i);
  Matrix sum = prefix_[static_cast<size_t>(end)] - prefix_[static_cast<size_t>(begin)];
  sum *= 1.0 / static_cast<double>(end - begin);
  return sum;
}

double MatrixWeight::average_logdet(DyadicInterval i) const {
  require(grid_.contains(i), "MatrixWeight::average_logdet: interval is outside the window");
  std::int64_t begin = grid_.cells_begin(i);
  std::int64_t end = grid_.cells_end(i);
  double sum = logdet_prefix_[static_cast<size_t>(end)] - logdet_prefix_[static_cast<size_t>(begin)];
  return sum / static_cast<double>(end - begin);
}

MatrixWeight MatrixWeight::inverse() const {
  std::vector<Matrix> inv_cells;
  inv_cells.reserve(cells_.size());
  for (size_t i = 0; i < cells_.size(); ++i) {
    double cond = condition_number(cells_[i]);
    if (!(cond <= 1e12))
      throw std::invalid_argument("MatrixWeight::inverse: cell " + std::to_string(i) +
                                  " has condition number " + std::to_string(cond) +
                                  " beyond 1e12");
    Matrix inv_sqrt = psd_inv_sqrt(cells_[i]);
    inv_cells.push_back(inv_sqrt * inv_sqrt);
  }
  return MatrixWeight(grid_, dim_, std::move(inv_cells));
}

double weighted_norm(const Field& f, const MatrixWeight& w) {
  require(f.grid() == w.grid() && f.dim() == w.dim(),
          "weighted_norm: field and weight must share window, depth, and dimension");
  double s = 0.0;
  const int dim = f.dim();
  for (std::int64_t cell = 0; cell < f.num_cells(); ++cell) {
    const Matrix& m = w.cell(cell);
    for (int r = 0; r < dim; ++r) {
      double row = 0.0;
      for (int c = 0; c < dim; ++c) row += m(r, c) * f.at(cell, c);
      s += row * f.at(cell, r);
    }
  }
  return std::sqrt(s * f.grid().cell_width());
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string MatrixWeight::to_json() const {
  nlohmann::json j;
  j["N"] = dim_;
  j["D"] = grid_.depth();
  j["window"] = {grid_.lo(), grid_.hi()};
  nlohmann::json cells = nlohmann::json::array();
  for (const Matrix& c : cells_) {
    nlohmann::json entry = nlohmann::json::array();
    for (int r = 0; r < dim_; ++r)
      for (int col = 0; col < dim_; ++col) entry.push_back(c(r, col));
    cells.push_back(std::move(entry));
  }
  j["cells"] = std::move(cells);
  return j.dump(2);
}

MatrixWeight MatrixWeight::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("MatrixWeight::from_json: ") + e.what());
  }
  try {
    int dim = j.at("N").get<int>();
    int depth = j.at("D").get<int>();
    auto window = j.at("window");
    require(window.is_array() && window.size() == 2,
            "MatrixWeight::from_json: window must be [lo, hi]");
    Grid grid(window[0].get<double>(), window[1].get<double>(), depth);
    const auto& cells_json = j.at("cells");
    require(cells_json.is_array(), "MatrixWeight::from_json: cells must be an array");
    std::vector<Matrix> cells;
    cells.reserve(cells_json.size());
    for (const auto& entry : cells_json) {
      require(entry.is_array() && static_cast<int>(entry.size()) == dim * dim,
              "MatrixWeight::from_json: each cell needs N*N row-major entries");
      Matrix m(dim, dim);
      int pos = 0;
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = entry[pos++].get<double>();
      cells.push_back(std::move(m));
    }
    return MatrixWeight(grid, dim, std::move(cells));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("MatrixWeight::from_json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

const char* weight_kind_name(WeightKind kind) {
  switch (kind) {
    case WeightKind::constant: return "constant";
    case WeightKind::two_value: return "two_value";
    case WeightKind::scalar_power: return "scalar_power";
    case WeightKind::rotating: return "rotating";
    case WeightKind::random_logbounded: return "random_logbounded";
  }
  return "unknown";
}

namespace {

Matrix scalar_cell(double value, int dim) {
  Matrix m = Matrix::identity(dim);
  m *= value;
  return m;
}

Matrix rotating_cell(double theta, double eccentricity, int dim) {
  // Eigenvalues (1, eccentricity) in a frame rotated by theta in the first
  // two coordinates; identity elsewhere.
  Matrix m = Matrix::identity(dim);
  double c = std::cos(theta);
  double s = std::sin(theta);
  m(0, 0) = c * c + eccentricity * s * s;
  m(1, 1) = s * s + eccentricity * c * c;
  m(0, 1) = m(1, 0) = (1.0 - eccentricity) * c * s;
  return m;
}

Matrix random_logbounded_cell(double cond_max, int dim, Rng& rng) {
  // Random orthogonal frame from normalized Gaussian columns (Gram-Schmidt),
  // log-uniform eigenvalues in [1/cond_max, cond_max].
  std::vector<Vec> basis;
  while (static_cast<int>(basis.size()) < dim) {
    Vec v = rng.unit_vector(dim);
    for (const Vec& u : basis) {
      double dot = 0.0;
      for (int i = 0; i < dim; ++i) dot += u[i] * v[i];
      for (int i = 0; i < dim; ++i) v[i] -= dot * u[i];
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 < 1e-8) continue;  // nearly dependent draw; try again
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    basis.push_back(std::move(v));
  }
  double log_max = std::log(cond_max);
  Matrix m(dim, dim);
  for (int j = 0; j < dim; ++j) {
    double ev = std::exp(rng.uniform(-log_max, log_max));
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) m(r, c) += ev * basis[j][r] * basis[j][c];
  }
  for (int r = 0; r < dim; ++r)
    for (int c = r + 1; c < dim; ++c) {
      double avg = 0.5 * (m(r, c) + m(c, r));
      m(r, c) = avg;
      m(c, r) = avg;
    }
  return m;
}

}  // namespace

MatrixWeight generate_weight(const WeightSpec& spec, int dim, const Grid& grid,
                             std::uint64_t seed) {
  require(dim >= 1, "generate_weight: dimension must be positive");
  const std::int64_t n = grid.num_cells();
  std::vector<Matrix> cells;
  cells.reserve(static_cast<size_t>(n));

  switch (spec.kind) {
    case WeightKind::constant: {
      Matrix base = spec.constant_matrix.rows() == 0 ? Matrix::identity(dim)
                                                     : spec.constant_matrix;
      require(base.rows() == dim && base.cols() == dim,
              "generate_weight: constant matrix has the wrong shape");
      require(base.is_symmetric(1e-12), "generate_weight: constant matrix is not symmetric");
      for (std::int64_t i = 0; i < n; ++i) cells.push_back(base);
      break;
    }
    case WeightKind::two_value: {
      require(spec.a > 0.0 && spec.b > 0.0, "generate_weight: two_value needs positive a, b");
      require(grid.depth() >= 1, "generate_weight: two_value needs depth >= 1");
      for (std::int64_t i = 0; i < n; ++i)
        cells.push_back(scalar_cell(i < n / 2 ? spec.a : spec.b, dim));
      break;
    }
    case WeightKind::scalar_power: {
      require(spec.alpha > -1.0,
              "generate_weight: scalar_power exponent must exceed -1 (got " +
                  std::to_string(spec.alpha) + ")");
      for (std::int64_t i = 0; i < n; ++i) {
        double mid = grid.lo() + (static_cast<double>(i) + 0.5) * grid.cell_width();
        require(mid > 0.0,
                "generate_weight: scalar_power needs cell midpoints in (0, inf)");
        cells.push_back(scalar_cell(std::pow(mid, spec.alpha), dim));
      }
      break;
    }
    case WeightKind::rotating: {
      require(dim >= 2, "generate_weight: rotating needs dimension >= 2");
      require(spec.eccentricity > 0.0, "generate_weight: rotating eccentricity must be positive");
      for (std::int64_t i = 0; i < n; ++i) {
        double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        cells.push_back(rotating_cell(spec.theta0 + spec.theta_rate * t, spec.eccentricity, dim));
      }
      break;
    }
    case WeightKind::random_logbounded: {
      require(spec.cond_max >= 1.0, "generate_weight: cond_max must be at least 1");
      Rng rng(seed);
      for (std::int64_t i = 0; i < n; ++i)
        cells.push_back(random_logbounded_cell(spec.cond_max, dim, rng));
      break;
    }
  }
  return MatrixWeight(grid, dim, std::move(cells));
}

}  // namespace matweight
