#include "matweight/conditions.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Scan all intervals, keeping the first maximizer in (level, index) order.
template <typename Fn>
void scan_intervals(const Grid& grid, Fn&& visit) {
  for (int level = 0; level <= grid.depth(); ++level)
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k)
      visit(DyadicInterval{level, k});
}

Vec top_eigenvector(const Matrix& m) {
  Eigh e = symmetric_eigendecomposition(m);
  int n = m.rows();
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = e.vectors(i, n - 1);
  return v;
}

}  // namespace

std::string ConditionReport::to_json() const {
  nlohmann::json j;
  j["condition"] = condition;
  j["constant"] = constant;
  j["witness"] = {{"level", witness.level}, {"index", witness.index}};
  if (direction)
    j["direction"] = *direction;
  else
    j["direction"] = nullptr;
  if (r)
    j["r"] = *r;
  else
    j["r"] = nullptr;
  j["depth_scanned"] = depth_scanned;
  return j.dump(2);
}

ConditionReport joint_a2(const MatrixWeight& u, const MatrixWeight& v) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "joint_a2: weights must share window, depth, and dimension");
  MatrixWeight v_inv = v.inverse();

  ConditionReport report;
  report.condition = "joint_a2";
  report.constant = -1.0;
  report.depth_scanned = u.grid().depth();

  Matrix witness_matrix;
  scan_intervals(u.grid(), [&](DyadicInterval i) {
    Matrix half = psd_sqrt(v_inv.average(i));
    Matrix m = half * u.average(i) * half;
    double value = spectral_norm(m);
    if (value > report.constant) {
      report.constant = value;
      report.witness = i;
      witness_matrix = m;
    }
  });
  report.direction = top_eigenvector(witness_matrix);
  return report;
}

ConditionReport a2_zero(const MatrixWeight& w) {
  ConditionReport report;
  report.condition = "a2_zero";
  report.constant = -1.0;
  report.depth_scanned = w.grid().depth();

  scan_intervals(w.grid(), [&](DyadicInterval i) {
    double value = std::exp(psd_logdet(w.average(i)) - w.average_logdet(i));
    if (value > report.constant) {
      report.constant = value;
      report.witness = i;
    }
  });
  return report;
}

ConditionReport reverse_holder(const MatrixWeight& w, double r, int num_directions,
                               std::uint64_t seed) {
  require(r > 2.0, "reverse_holder: exponent must exceed 2 (got " + std::to_string(r) + ")");
  require(num_directions >= 0, "reverse_holder: direction count must be nonnegative");

  const int dim = w.dim();
  const Grid& grid = w.grid();

  // Shared sphere samples; canonical directions; per-interval eigenvectors.
  std::vector<Vec> sphere;
  Rng rng(derive_seed(seed, "reverse_holder_directions"));
  for (int i = 0; i < num_directions; ++i) sphere.push_back(rng.unit_vector(dim));

  ConditionReport report;
  report.condition = "reverse_holder";
  report.constant = -1.0;
  report.r = r;
  report.depth_scanned = grid.depth();

  scan_intervals(grid, [&](DyadicInterval i) {
    Matrix inv_half = psd_inv_sqrt(w.average(i));
    std::int64_t begin = grid.cells_begin(i);
    std::int64_t end = grid.cells_end(i);

    // Normalized cell matrices M = <W>^{-1/2} W(x) <W>^{-1/2}; the r-mean of
    // ||W^{1/2}(x) <W>^{-1/2} y|| over the interval is computed from <M y, y>.
    std::vector<Matrix> normalized;
    normalized.reserve(static_cast<size_t>(end - begin));
    for (std::int64_t c = begin; c < end; ++c)
      normalized.push_back(inv_half * w.cell(c) * inv_half);

    std::vector<Vec> directions;
    for (int j = 0; j < dim; ++j) {
      Vec e(dim, 0.0);
      e[j] = 1.0;
      directions.push_back(std::move(e));
    }
    directions.insert(directions.end(), sphere.begin(), sphere.end());
    {
      Eigh e = symmetric_eigendecomposition(w.average(i));
      for (int j = 0; j < dim; ++j) {
        Vec v(dim);
        for (int k = 0; k < dim; ++k) v[k] = e.vectors(k, j);
        directions.push_back(std::move(v));
      }
    }

    double inv_count = 1.0 / static_cast<double>(end - begin);
    for (const Vec& y : directions) {
      double mean = 0.0;
      for (const Matrix& m : normalized) {
        double quad = 0.0;
        for (int a = 0; a < dim; ++a) {
          double row = 0.0;
          for (int b = 0; b < dim; ++b) row += m(a, b) * y[b];
          quad += row * y[a];
        }
        mean += std::pow(std::max(quad, 0.0), 0.5 * r);
      }
      double value = std::pow(mean * inv_count, 1.0 / r);
      if (value > report.constant) {
        report.constant = value;
        report.witness = i;
        report.direction = y;
      }
    }
  });
  return report;
}

const std::vector<double>& reverse_holder_ladder() {
  static const std::vector<double> ladder = {2.25, 2.5, 3.0, 4.0, 6.0, 8.0};
  return ladder;
}

std::pair<std::optional<double>, ConditionReport> rh_exponent_search(
    const MatrixWeight& w, double budget, int num_directions, std::uint64_t seed) {
  require(budget >= 1.0, "rh_exponent_search: budget below 1 can never be met");
  const auto& ladder = reverse_holder_ladder();

  std::optional<double> best;
  std::optional<ConditionReport> best_report;
  ConditionReport smallest_report;
  for (double r : ladder) {
    ConditionReport rep = reverse_holder(w, r, num_directions, seed);
    if (r == ladder.front()) smallest_report = rep;
    if (rep.constant <= budget) {
      best = r;
      best_report = rep;
    }
    // Constants are nondecreasing in r, so the first failure ends the climb.
    if (rep.constant > budget) break;
  }
  return {best, best ? *best_report : smallest_report};
}

}  // namespace matweight
