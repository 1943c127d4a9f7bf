#include "matweight/hilbert_avg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "matweight/operators.hpp"
#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Member interval of the grid containing x at a level, if any. The index is
// guessed by division and then verified against the endpoints, so boundary
// rounding cannot put x in the wrong interval.
std::optional<DyadicInterval> member_containing(const ShiftedGrid& g, int level, double x) {
  const double w = std::ldexp(1.0, -level);
  const auto guess =
      static_cast<std::int64_t>(std::floor((x / g.dilation() - g.offset(level)) / w));
  for (std::int64_t k = guess - 1; k <= guess + 1; ++k) {
    DyadicInterval i{level, k};
    if (!g.contains(i)) continue;
    auto [a, b] = g.endpoints(i);
    if (x >= a && x < b) return i;
  }
  return std::nullopt;
}

// Exact integral of each component of f over [p, q) (clipped to the window).
Vec integrate(const Field& f, double p, double q) {
  const Grid& grid = f.grid();
  Vec out(static_cast<size_t>(f.dim()), 0.0);
  p = std::max(p, grid.lo());
  q = std::min(q, grid.hi());
  if (p >= q) return out;
  const double w = grid.cell_width();
  auto first = static_cast<std::int64_t>(std::floor((p - grid.lo()) / w));
  first = std::clamp<std::int64_t>(first, 0, grid.num_cells() - 1);
  for (std::int64_t c = first; c < grid.num_cells(); ++c) {
    const double a = grid.lo() + w * static_cast<double>(c);
    if (a >= q) break;
    const double overlap = std::min(q, a + w) - std::max(p, a);
    if (overlap <= 0.0) continue;
    for (int j = 0; j < f.dim(); ++j) out[static_cast<size_t>(j)] += overlap * f.at(c, j);
  }
  return out;
}

}  // namespace

Vec hilbert_point(const Field& f, double x) {
  require(std::isfinite(x), "hilbert_point: evaluation point must be finite");
  const Grid& grid = f.grid();
  const double w = grid.cell_width();
  Vec out(static_cast<size_t>(f.dim()), 0.0);
  for (std::int64_t c = 0; c < grid.num_cells(); ++c) {
    bool zero = true;
    for (int j = 0; j < f.dim(); ++j)
      if (f.at(c, j) != 0.0) zero = false;
    if (zero) continue;  // no mass, no singularity
    const double a = grid.lo() + w * static_cast<double>(c);
    const double b = a + w;
    if (x == a || x == b)
      throw std::domain_error("hilbert_point: evaluation point sits on the boundary of a cell "
                              "carrying mass");
    // p.v. of the log kernel over [a, b); zero when x is the cell midpoint.
    const double kernel = std::log(std::abs(x - a) / std::abs(x - b));
    for (int j = 0; j < f.dim(); ++j) out[static_cast<size_t>(j)] += f.at(c, j) * kernel;
  }
  return out;
}

Field hilbert_on_mesh(const Field& f, const Grid& mesh) {
  Field out(mesh, f.dim());
  const double w = mesh.cell_width();
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
    const double x = mesh.lo() + w * (static_cast<double>(c) + 0.5);
    Vec v = hilbert_point(f, x);
    for (int j = 0; j < f.dim(); ++j) out.at(c, j) = v[static_cast<size_t>(j)];
  }
  return out;
}

Field shift_on_grid(const ShiftedGrid& grid, const Field& f) {
  const Grid& mesh = f.grid();
  require(mesh.lo() == grid.window_lo() && mesh.hi() == grid.window_hi(),
          "shift_on_grid: field window differs from the grid window");
  const int dim = f.dim();
  const int lmin = grid.level_min();
  const int lmax = grid.level_max();

  // Analysis: coefficients for members whose halves stay inside the level
  // range, via exact overlap integrals against the two halves.
  std::vector<Vec> coeff(static_cast<size_t>(lmax - lmin));  // per level, flat (k - first)*dim
  for (int level = lmin; level < lmax; ++level) {
    Vec& row = coeff[static_cast<size_t>(level - lmin)];
    row.assign(static_cast<size_t>(grid.num_intervals(level)) * dim, 0.0);
    const double height = 1.0 / std::sqrt(grid.length(level));
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      const DyadicInterval i{level, grid.first_index(level) + k};
      auto [a, b] = grid.endpoints(i);
      const double mid = 0.5 * (a + b);
      Vec left = integrate(f, a, mid);
      Vec right = integrate(f, mid, b);
      for (int j = 0; j < dim; ++j)
        row[static_cast<size_t>(k) * dim + j] =
            height * (right[static_cast<size_t>(j)] - left[static_cast<size_t>(j)]);
    }
  }

  // Shift recurrence: out(I) = c(left child) - c(right child); the finest
  // coefficient level has no coefficient-carrying children and maps to zero.
  std::vector<Vec> shifted(coeff.size());
  for (int level = lmin; level < lmax; ++level) {
    Vec& row = shifted[static_cast<size_t>(level - lmin)];
    row.assign(static_cast<size_t>(grid.num_intervals(level)) * dim, 0.0);
    if (level + 1 >= lmax) continue;
    const Vec& fine = coeff[static_cast<size_t>(level + 1 - lmin)];
    const std::int64_t fine_first = grid.first_index(level + 1);
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      const DyadicInterval i{level, grid.first_index(level) + k};
      const std::int64_t lc = grid.left_child(i).index - fine_first;
      const std::int64_t rc = grid.right_child(i).index - fine_first;
      for (int j = 0; j < dim; ++j)
        row[static_cast<size_t>(k) * dim + j] = fine[static_cast<size_t>(lc) * dim + j] -
                                                fine[static_cast<size_t>(rc) * dim + j];
    }
  }

  // Synthesis at mesh midpoints: one containing interval per level.
  Field out(mesh, dim);
  const double w = mesh.cell_width();
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c) {
    const double x = mesh.lo() + w * (static_cast<double>(c) + 0.5);
    for (int level = lmin; level < lmax; ++level) {
      auto i = member_containing(grid, level, x);
      if (!i) continue;
      const double h = grid.haar_value(*i, x);
      const Vec& row = shifted[static_cast<size_t>(level - lmin)];
      const auto k = static_cast<size_t>(i->index - grid.first_index(level));
      for (int j = 0; j < dim; ++j) out.at(c, j) += h * row[k * dim + j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// averaging
// ---------------------------------------------------------------------------

std::string AveragingReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "sample_count,fitted_c,residual\n";
  for (const AveragingCheckpoint& row : checkpoints)
    os << row.sample_count << "," << row.fitted_c << "," << row.residual << "\n";
  return os.str();
}

namespace {

std::vector<std::int64_t> normalized_checkpoints(std::vector<std::int64_t> checkpoints,
                                                 std::int64_t total) {
  checkpoints.erase(
      std::remove_if(checkpoints.begin(), checkpoints.end(),
                     [total](std::int64_t c) { return c < 1 || c > total; }),
      checkpoints.end());
  checkpoints.push_back(total);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  return checkpoints;
}

// Least-squares scale of avg against target over the interior cells (outer
// 10% of the window dropped on each side).
AveragingCheckpoint fit_checkpoint(const Field& avg, const Field& target,
                                   std::int64_t sample_count) {
  const Grid& grid = avg.grid();
  const auto n = grid.num_cells();
  const auto first = static_cast<std::int64_t>(std::ceil(0.1 * static_cast<double>(n)));
  const auto last = static_cast<std::int64_t>(std::floor(0.9 * static_cast<double>(n)));

  double aa = 0.0, at = 0.0, tt = 0.0;
  for (std::int64_t c = first; c < last; ++c) {
    for (int j = 0; j < avg.dim(); ++j) {
      aa += avg.at(c, j) * avg.at(c, j);
      at += avg.at(c, j) * target.at(c, j);
      tt += target.at(c, j) * target.at(c, j);
    }
  }

  AveragingCheckpoint row;
  row.sample_count = sample_count;
  if (aa == 0.0) {
    if (tt > 0.0)
      throw std::runtime_error(
          "mc_average: degenerate fit: the averaged shift vanishes on the interior but the "
          "transform does not");
    return row;  // both sides vanish: c = 0, residual 0
  }
  row.fitted_c = at / aa;
  double err = 0.0;
  for (std::int64_t c = first; c < last; ++c)
    for (int j = 0; j < avg.dim(); ++j) {
      const double d = row.fitted_c * avg.at(c, j) - target.at(c, j);
      err += d * d;
    }
  row.residual = tt > 0.0 ? std::sqrt(err / tt) : 0.0;
  return row;
}

McAverageResult average_impl(const Field& f,
                             const std::function<ShiftedGrid(std::int64_t)>& grid_at,
                             std::int64_t total, std::vector<std::int64_t> checkpoints) {
  require(total >= 1, "mc_average: need at least one sample");
  Field target = hilbert_on_mesh(f, f.grid());
  std::vector<std::int64_t> marks = normalized_checkpoints(std::move(checkpoints), total);

  McAverageResult result{Field(f.grid(), f.dim()), {}};
  Field sum(f.grid(), f.dim());
  std::size_t next_mark = 0;
  for (std::int64_t s = 0; s < total; ++s) {
    Field one = shift_on_grid(grid_at(s), f);
    for (std::size_t i = 0; i < sum.values().size(); ++i) sum.values()[i] += one.values()[i];
    if (next_mark < marks.size() && s + 1 == marks[next_mark]) {
      Field avg(f.grid(), f.dim(), sum.values());
      const double inv = 1.0 / static_cast<double>(s + 1);
      for (double& x : avg.values()) x *= inv;
      result.report.checkpoints.push_back(fit_checkpoint(avg, target, s + 1));
      if (s + 1 == total) result.average = std::move(avg);
      ++next_mark;
    }
  }
  result.report.samples = total;
  result.report.fitted_c = result.report.checkpoints.back().fitted_c;
  result.report.residual = result.report.checkpoints.back().residual;
  return result;
}

}  // namespace

Field mc_average_field(const Field& f, const AveragingOptions& options, std::uint64_t seed) {
  require(options.num_samples >= 1, "mc_average_field: need at least one sample");
  Field sum(f.grid(), f.dim());
  for (std::int64_t s = 0; s < options.num_samples; ++s) {
    ShiftedGrid grid =
        sample_shifted_grid(derive_seed(seed, "grid." + std::to_string(s)), options.level_min,
                            options.level_max, f.grid().lo(), f.grid().hi(), options.dilate);
    Field one = shift_on_grid(grid, f);
    for (std::size_t i = 0; i < sum.values().size(); ++i) sum.values()[i] += one.values()[i];
  }
  const double inv = 1.0 / static_cast<double>(options.num_samples);
  for (double& x : sum.values()) x *= inv;
  return sum;
}

McAverageResult mc_average(const Field& f, const AveragingOptions& options, std::uint64_t seed) {
  return average_impl(
      f,
      [&](std::int64_t s) {
        return sample_shifted_grid(derive_seed(seed, "grid." + std::to_string(s)),
                                   options.level_min, options.level_max, f.grid().lo(),
                                   f.grid().hi(), options.dilate);
      },
      options.num_samples, options.checkpoints);
}

McAverageResult mc_average_over_grids(const Field& f, const std::vector<ShiftedGrid>& grids,
                                      const std::vector<std::int64_t>& checkpoints) {
  return average_impl(
      f, [&](std::int64_t s) { return grids[static_cast<std::size_t>(s)]; },
      static_cast<std::int64_t>(grids.size()), checkpoints);
}

// ---------------------------------------------------------------------------
// weighted scan
// ---------------------------------------------------------------------------

double weighted_shift_norm_on_grid(const MatrixWeight& u, const MatrixWeight& v,
                                   const ShiftedGrid& grid) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "weighted_shift_norm_on_grid: weights live on different spaces");
  const Grid& mesh = u.grid();
  require(mesh.lo() == grid.window_lo() && mesh.hi() == grid.window_hi(),
          "weighted_shift_norm_on_grid: weight window differs from the grid window");
  const int dim = u.dim();
  const int lmin = grid.level_min();
  const int lmax = grid.level_max();

  // Flat numbering of the coefficient-carrying members (levels below lmax).
  std::vector<std::int64_t> level_base(static_cast<size_t>(lmax - lmin), 0);
  std::int64_t num_coeff = 0;
  for (int level = lmin; level < lmax; ++level) {
    level_base[static_cast<size_t>(level - lmin)] = num_coeff;
    num_coeff += grid.num_intervals(level);
  }
  if (num_coeff == 0) return 0.0;
  const auto flat_of = [&](DyadicInterval i) {
    return level_base[static_cast<size_t>(i.level - lmin)] +
           (i.index - grid.first_index(i.level));
  };

  // Common refinement of the mesh and the grid: breakpoints from both.
  std::vector<double> cuts;
  for (std::int64_t c = 0; c <= mesh.num_cells(); ++c)
    cuts.push_back(mesh.lo() + mesh.cell_width() * static_cast<double>(c));
  for (int level = lmin; level <= lmax; ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      auto [a, b] = grid.endpoints({level, grid.first_index(level) + k});
      cuts.push_back(a);
      cuts.push_back(b);
      if (level < lmax) cuts.push_back(0.5 * (a + b));  // the split the Haar function uses
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Matrix> v_inv_sqrt;
  v_inv_sqrt.reserve(static_cast<size_t>(mesh.num_cells()));
  for (std::int64_t c = 0; c < mesh.num_cells(); ++c)
    v_inv_sqrt.push_back(psd_inv_sqrt(v.cell(c)));

  const int kn = static_cast<int>(num_coeff) * dim;
  const int n = static_cast<int>(mesh.num_cells()) * dim;
  Matrix analysis(kn, n);   // coefficients of V^{-1/2} applied to the mesh basis
  Matrix gram(kn, kn);      // <U h_I e_j, h_J e_m>
  const double inv_root_w = 1.0 / std::sqrt(mesh.cell_width());

  std::vector<std::pair<std::int64_t, double>> active;  // (flat, haar value) per segment
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double p = cuts[s];
    const double q = cuts[s + 1];
    const double len = q - p;
    if (len <= 0.0) continue;
    const double x = p + 0.5 * len;
    auto cell = static_cast<std::int64_t>(std::floor((x - mesh.lo()) / mesh.cell_width()));
    cell = std::clamp<std::int64_t>(cell, 0, mesh.num_cells() - 1);

    active.clear();
    for (int level = lmin; level < lmax; ++level) {
      auto i = member_containing(grid, level, x);
      if (!i) continue;
      active.emplace_back(flat_of(*i), grid.haar_value(*i, x));
    }
    if (active.empty()) continue;

    const Matrix& vc = v_inv_sqrt[static_cast<size_t>(cell)];
    const Matrix& uc = u.cell(cell);
    for (const auto& [flat_i, hi] : active) {
      const int row = static_cast<int>(flat_i) * dim;
      const int col = static_cast<int>(cell) * dim;
      const double scale = len * hi * inv_root_w;
      for (int j = 0; j < dim; ++j)
        for (int m = 0; m < dim; ++m) analysis(row + j, col + m) += scale * vc(j, m);
      for (const auto& [flat_j, hj] : active) {
        const int col_j = static_cast<int>(flat_j) * dim;
        const double g = len * hi * hj;
        for (int j = 0; j < dim; ++j)
          for (int m = 0; m < dim; ++m) gram(row + j, col_j + m) += g * uc(j, m);
      }
    }
  }

  // Shifted analysis: row block of I becomes (left child) - (right child).
  Matrix shifted(kn, n);
  for (int level = lmin; level + 1 < lmax; ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      const DyadicInterval i{level, grid.first_index(level) + k};
      const int row = static_cast<int>(flat_of(i)) * dim;
      const int lc = static_cast<int>(flat_of(grid.left_child(i))) * dim;
      const int rc = static_cast<int>(flat_of(grid.right_child(i))) * dim;
      for (int j = 0; j < dim; ++j)
        for (int c = 0; c < n; ++c)
          shifted(row + j, c) = analysis(lc + j, c) - analysis(rc + j, c);
    }
  }

  Matrix m = shifted.transposed() * (gram * shifted);
  const double top = spectral_norm(m);
  return std::sqrt(std::max(0.0, top));
}

HilbertScanReport weighted_hilbert_scan(const MatrixWeight& u, const MatrixWeight& v,
                                        const std::vector<Field>& test_functions, int num_grids,
                                        int level_min, int level_max, std::uint64_t seed) {
  require(num_grids >= 1, "weighted_hilbert_scan: need at least one grid");
  const Grid& mesh = u.grid();

  HilbertScanReport report;
  for (const Field& f : test_functions) {
    require(f.grid() == mesh && f.dim() == u.dim(),
            "weighted_hilbert_scan: test function lives on a different space");
    const double denom = f.l2_norm();
    require(denom > 0.0, "weighted_hilbert_scan: zero test function");
    Field image = pointwise_weight_half(
        u, 1, hilbert_on_mesh(pointwise_weight_half(v, -1, f), mesh));
    report.test_ratios.push_back(image.l2_norm() / denom);
    report.test_max = std::max(report.test_max, report.test_ratios.back());
  }

  for (int s = 0; s < num_grids; ++s) {
    ShiftedGrid grid = sample_shifted_grid(derive_seed(seed, "scan." + std::to_string(s)),
                                           level_min, level_max, mesh.lo(), mesh.hi(), true);
    report.grid_norms.push_back(weighted_shift_norm_on_grid(u, v, grid));
  }
  report.grid_max = *std::max_element(report.grid_norms.begin(), report.grid_norms.end());
  report.grid_min = *std::min_element(report.grid_norms.begin(), report.grid_norms.end());
  report.dispersion = report.grid_min > 0.0 ? report.grid_max / report.grid_min : 0.0;
  report.ratio = report.grid_max > 0.0 ? report.test_max / report.grid_max : 0.0;
  return report;
}

}  // namespace matweight
