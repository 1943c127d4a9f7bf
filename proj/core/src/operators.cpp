#include "matweight/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "matweight/rng.hpp"

namespace matweight {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string interval_name(DyadicInterval i) {
  return "(level " + std::to_string(i.level) + ", index " + std::to_string(i.index) + ")";
}

template <typename F>
void for_each_slot(const Grid& grid, F&& fn) {
  for (int level = 0; level < grid.depth(); ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      fn(DyadicInterval{level, k});
    }
  }
}

Vec slot_vec(const HaarCoefficients& c, DyadicInterval i) {
  const double* p = c.at(i);
  return Vec(p, p + c.dim());
}

void write_slot(HaarCoefficients& c, DyadicInterval i, const Vec& v) {
  double* p = c.at(i);
  for (int j = 0; j < c.dim(); ++j) p[j] = v[static_cast<size_t>(j)];
}

// Sign of the Haar function of a level-`level` ancestor on leaf cell `cell`:
// -1 on the left half, +1 on the right half.
double haar_sign(int depth, int level, std::int64_t cell) {
  return ((cell >> (depth - level - 1)) & 1) ? 1.0 : -1.0;
}

DyadicInterval lowest_common_ancestor(const Grid& grid, DyadicInterval a, DyadicInterval b) {
  require(grid.contains(a) && grid.contains(b), "lowest_common_ancestor: interval outside grid");
  while (a.level > b.level) a = grid.parent(a);
  while (b.level > a.level) b = grid.parent(b);
  while (a.index != b.index) {
    a = grid.parent(a);
    b = grid.parent(b);
  }
  return a;
}

// Block-diagonal matrix of a block multiplier in the flat coefficient basis.
Matrix block_diag_matrix(const BlockMultiplier& m, const Grid& grid, int dim) {
  const int k = static_cast<int>(grid.num_haar()) * dim;
  Matrix out(k, k);
  for_each_slot(grid, [&](DyadicInterval i) {
    auto it = m.blocks.find(i);
    require(it != m.blocks.end(), "block multiplier: no block for interval " + interval_name(i));
    const Matrix& b = it->second;
    const int base = static_cast<int>(haar_flat_index(grid, i)) * dim;
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) out(base + r, base + c) = b(r, c);
  });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// coefficient indexing
// ---------------------------------------------------------------------------

std::int64_t haar_flat_index(const Grid& grid, DyadicInterval i) {
  require(grid.contains(i) && i.level < grid.depth(),
          "haar_flat_index: interval carries no coefficient " + interval_name(i));
  return (std::int64_t{1} << i.level) - 1 + i.index;
}

DyadicInterval haar_unflatten(const Grid& grid, std::int64_t flat) {
  require(flat >= 0 && flat < grid.num_haar(), "haar_unflatten: index out of range");
  int level = 0;
  while ((std::int64_t{2} << level) - 1 <= flat) ++level;
  return {level, flat - ((std::int64_t{1} << level) - 1)};
}

// ---------------------------------------------------------------------------
// martingale transforms
// ---------------------------------------------------------------------------

void SignPattern::set(DyadicInterval i, int sign) {
  require(sign == 1 || sign == -1, "SignPattern: sign must be +1 or -1");
  entries_[i] = sign;
}

int SignPattern::at(DyadicInterval i) const {
  auto it = entries_.find(i);
  return it == entries_.end() ? 1 : it->second;
}

HaarCoefficients martingale_transform(const SignPattern& sigma, const HaarCoefficients& c) {
  HaarCoefficients out(c.grid(), c.dim());
  for_each_slot(c.grid(), [&](DyadicInterval i) {
    const double s = static_cast<double>(sigma.at(i));
    const double* src = c.at(i);
    double* dst = out.at(i);
    for (int j = 0; j < c.dim(); ++j) dst[j] = s * src[j];
  });
  return out;
}

// ---------------------------------------------------------------------------
// block multipliers
// ---------------------------------------------------------------------------

HaarCoefficients block_multiply(const BlockMultiplier& m, const HaarCoefficients& c) {
  HaarCoefficients out(c.grid(), c.dim());
  for_each_slot(c.grid(), [&](DyadicInterval i) {
    auto it = m.blocks.find(i);
    require(it != m.blocks.end(), "block_multiply: no block for interval " + interval_name(i));
    const Matrix& b = it->second;
    require(b.rows() == c.dim() && b.cols() == c.dim(),
            "block_multiply: block shape mismatch at interval " + interval_name(i));
    write_slot(out, i, b.apply(slot_vec(c, i)));
  });
  return out;
}

BlockMultiplier avg_sqrt_multiplier(const MatrixWeight& w) {
  BlockMultiplier m;
  for_each_slot(w.grid(), [&](DyadicInterval i) { m.blocks[i] = psd_sqrt(w.average(i)); });
  return m;
}

BlockMultiplier avg_inv_sqrt_multiplier(const MatrixWeight& w) {
  BlockMultiplier m;
  for_each_slot(w.grid(), [&](DyadicInterval i) { m.blocks[i] = psd_inv_sqrt(w.average(i)); });
  return m;
}

BlockMultiplier child_avg_sqrt_multiplier(const MatrixWeight& w, ChildSide side) {
  BlockMultiplier m;
  const Grid& grid = w.grid();
  for_each_slot(grid, [&](DyadicInterval i) {
    DyadicInterval child = side == ChildSide::left ? grid.left_child(i) : grid.right_child(i);
    m.blocks[i] = psd_sqrt(w.average(child));
  });
  return m;
}

BlockMultiplier offset_avg_sqrt_multiplier(const MatrixWeight& w, const OffsetMap& offsets) {
  BlockMultiplier m;
  const Grid& grid = w.grid();
  for (const auto& [slot, target] : offsets) {
    require(grid.contains(slot) && slot.level < grid.depth(),
            "offset_avg_sqrt_multiplier: slot outside coefficient levels " + interval_name(slot));
    require(grid.contains(target),
            "offset_avg_sqrt_multiplier: target outside grid " + interval_name(target));
  }
  for_each_slot(grid, [&](DyadicInterval i) {
    auto it = offsets.find(i);
    require(it != offsets.end(),
            "offset_avg_sqrt_multiplier: offset map misses interval " + interval_name(i));
    m.blocks[i] = psd_sqrt(w.average(it->second));
  });
  return m;
}

Field pointwise_weight_half(const MatrixWeight& w, int sign, const Field& f) {
  require(sign == 1 || sign == -1, "pointwise_weight_half: sign must be +1 or -1");
  require(f.grid() == w.grid() && f.dim() == w.dim(),
          "pointwise_weight_half: field and weight live on different spaces");
  Field out(f.grid(), f.dim());
  Vec x(static_cast<size_t>(f.dim()));
  for (std::int64_t cell = 0; cell < f.num_cells(); ++cell) {
    Matrix half = sign == 1 ? psd_sqrt(w.cell(cell)) : psd_inv_sqrt(w.cell(cell));
    for (int j = 0; j < f.dim(); ++j) x[static_cast<size_t>(j)] = f.at(cell, j);
    Vec y = half.apply(x);
    for (int j = 0; j < f.dim(); ++j) out.at(cell, j) = y[static_cast<size_t>(j)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// dyadic shift
// ---------------------------------------------------------------------------

HaarCoefficients dyadic_shift(const HaarCoefficients& c) {
  HaarCoefficients out(c.grid(), c.dim());
  const Grid& grid = c.grid();
  for (int level = 0; level + 2 <= grid.depth(); ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      DyadicInterval i{level, k};
      const double* a = c.at(grid.left_child(i));
      const double* b = c.at(grid.right_child(i));
      double* dst = out.at(i);
      for (int j = 0; j < c.dim(); ++j) dst[j] = a[j] - b[j];
    }
  }
  return out;
}

HaarCoefficients dyadic_shift_part(const HaarCoefficients& c, ChildSide side) {
  HaarCoefficients out(c.grid(), c.dim());
  const Grid& grid = c.grid();
  const double sign = side == ChildSide::left ? 1.0 : -1.0;
  for (int level = 0; level + 2 <= grid.depth(); ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      DyadicInterval i{level, k};
      DyadicInterval child = side == ChildSide::left ? grid.left_child(i) : grid.right_child(i);
      const double* src = c.at(child);
      double* dst = out.at(i);
      for (int j = 0; j < c.dim(); ++j) dst[j] = sign * src[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// banded coefficient maps
// ---------------------------------------------------------------------------

BandSpec::BandSpec(const Grid& grid, int radius, std::vector<BandEntry> entries)
    : grid_(grid), radius_(radius), entries_(std::move(entries)) {
  require(radius >= 0, "BandSpec: radius must be nonnegative");
  for (const BandEntry& e : entries_) {
    require(grid_.contains(e.source) && e.source.level < grid_.depth(),
            "BandSpec: source is not a coefficient slot " + interval_name(e.source));
    require(grid_.contains(e.target) && e.target.level < grid_.depth(),
            "BandSpec: target is not a coefficient slot " + interval_name(e.target));
    require(std::isfinite(e.value), "BandSpec: entry value must be finite");
    const int d = tree_distance(grid_, e.source, e.target);
    require(d <= radius_, "BandSpec: entry at tree distance " + std::to_string(d) +
                              " exceeds radius " + std::to_string(radius_));
  }
  std::stable_sort(entries_.begin(), entries_.end(), [](const BandEntry& a, const BandEntry& b) {
    if (a.target != b.target) return a.target < b.target;
    return a.source < b.source;
  });
}

HaarCoefficients band_apply(const BandSpec& band, const HaarCoefficients& c) {
  require(c.grid() == band.grid(), "band_apply: coefficient grid differs from band grid");
  HaarCoefficients out(c.grid(), c.dim());
  for (const BandEntry& e : band.entries()) {
    const double* src = c.at(e.source);
    double* dst = out.at(e.target);
    for (int j = 0; j < c.dim(); ++j) dst[j] += e.value * src[j];
  }
  return out;
}

double phi_sup(const BandSpec& band) {
  double best = 0.0;
  for (const BandEntry& e : band.entries()) best = std::max(best, std::abs(e.value));
  return best;
}

std::vector<BandSpec> band_decompose(const BandSpec& band) {
  // Entries are target-major sorted, so a running counter per target hands
  // them out round-robin.
  std::map<DyadicInterval, std::size_t> seen;
  std::size_t num_parts = 0;
  for (const BandEntry& e : band.entries()) num_parts = std::max(num_parts, ++seen[e.target]);

  std::vector<std::vector<BandEntry>> parts(num_parts);
  seen.clear();
  for (const BandEntry& e : band.entries()) parts[seen[e.target]++].push_back(e);

  std::vector<BandSpec> out;
  out.reserve(num_parts);
  for (auto& p : parts) out.emplace_back(band.grid(), band.radius(), std::move(p));
  return out;
}

BandSpec shift_as_band(const Grid& grid) {
  std::vector<BandEntry> entries;
  for (int level = 0; level + 2 <= grid.depth(); ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      DyadicInterval i{level, k};
      entries.push_back({grid.left_child(i), i, 1.0});
      entries.push_back({grid.right_child(i), i, -1.0});
    }
  }
  return BandSpec(grid, 1, std::move(entries));
}

// ---------------------------------------------------------------------------
// weighted realizations, assembly, norms
// ---------------------------------------------------------------------------

FieldOp weighted_conjugate(CoeffOp op, const MatrixWeight& u, const MatrixWeight& v) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "weighted_conjugate: weights live on different spaces");
  return [op = std::move(op), u, v](const Field& g) {
    HaarCoefficients c = haar_decompose(pointwise_weight_half(v, -1, g), g.grid());
    std::fill(c.mean().begin(), c.mean().end(), 0.0);  // project away the mean
    HaarCoefficients oc = op(c);
    std::fill(oc.mean().begin(), oc.mean().end(), 0.0);
    return pointwise_weight_half(u, 1, haar_reconstruct(oc, g.grid()));
  };
}

Matrix assemble_coeff_op(const CoeffOp& op, const Grid& grid, int dim) {
  const int k = static_cast<int>(grid.num_haar()) * dim;
  Matrix out(k, k);
  HaarCoefficients unit(grid, dim);
  for_each_slot(grid, [&](DyadicInterval i) {
    const int base = static_cast<int>(haar_flat_index(grid, i)) * dim;
    for (int j = 0; j < dim; ++j) {
      unit.at(i)[j] = 1.0;
      HaarCoefficients image = op(unit);
      unit.at(i)[j] = 0.0;
      for_each_slot(grid, [&](DyadicInterval r) {
        const int row = static_cast<int>(haar_flat_index(grid, r)) * dim;
        const double* p = image.at(r);
        for (int m = 0; m < dim; ++m) out(row + m, base + j) = p[m];
      });
    }
  });
  return out;
}

Matrix assemble_field_op(const FieldOp& op, const Grid& grid, int dim) {
  const int n = static_cast<int>(grid.num_cells()) * dim;
  const double root_w = std::sqrt(grid.cell_width());
  Matrix out(n, n);
  Field unit(grid, dim);
  for (std::int64_t cell = 0; cell < grid.num_cells(); ++cell) {
    for (int j = 0; j < dim; ++j) {
      unit.at(cell, j) = 1.0 / root_w;  // orthonormal leaf basis vector
      Field image = op(unit);
      unit.at(cell, j) = 0.0;
      const int col = static_cast<int>(cell) * dim + j;
      for (int r = 0; r < n; ++r) out(r, col) = image.values()[static_cast<size_t>(r)] * root_w;
    }
  }
  return out;
}

Matrix assemble_coeff_to_field(const std::function<Field(const HaarCoefficients&)>& op,
                               const Grid& grid, int dim) {
  const int k = static_cast<int>(grid.num_haar()) * dim;
  const int n = static_cast<int>(grid.num_cells()) * dim;
  const double root_w = std::sqrt(grid.cell_width());
  Matrix out(n, k);
  HaarCoefficients unit(grid, dim);
  for_each_slot(grid, [&](DyadicInterval i) {
    const int base = static_cast<int>(haar_flat_index(grid, i)) * dim;
    for (int j = 0; j < dim; ++j) {
      unit.at(i)[j] = 1.0;
      Field image = op(unit);
      unit.at(i)[j] = 0.0;
      for (int r = 0; r < n; ++r)
        out(r, base + j) = image.values()[static_cast<size_t>(r)] * root_w;
    }
  });
  return out;
}

Matrix assemble_field_to_coeff(const std::function<HaarCoefficients(const Field&)>& op,
                               const Grid& grid, int dim) {
  const int k = static_cast<int>(grid.num_haar()) * dim;
  const int n = static_cast<int>(grid.num_cells()) * dim;
  const double root_w = std::sqrt(grid.cell_width());
  Matrix out(k, n);
  Field unit(grid, dim);
  for (std::int64_t cell = 0; cell < grid.num_cells(); ++cell) {
    for (int j = 0; j < dim; ++j) {
      unit.at(cell, j) = 1.0 / root_w;
      HaarCoefficients image = op(unit);
      unit.at(cell, j) = 0.0;
      const int col = static_cast<int>(cell) * dim + j;
      for_each_slot(grid, [&](DyadicInterval r) {
        const int row = static_cast<int>(haar_flat_index(grid, r)) * dim;
        const double* p = image.at(r);
        for (int m = 0; m < dim; ++m) out(row + m, col) = p[m];
      });
    }
  }
  return out;
}

double weighted_operator_norm(const CoeffOp& op, const MatrixWeight& u, const MatrixWeight& v) {
  Matrix m = assemble_field_op(weighted_conjugate(op, u, v), u.grid(), u.dim());
  return largest_singular_value(m);
}

Matrix weighted_synthesis_matrix(const MatrixWeight& u) {
  const Grid& grid = u.grid();
  const int dim = u.dim();
  const int k = static_cast<int>(grid.num_haar()) * dim;
  const int n = static_cast<int>(grid.num_cells()) * dim;
  const double root_w = std::sqrt(grid.cell_width());

  std::vector<Matrix> cell_sqrt;
  cell_sqrt.reserve(static_cast<size_t>(grid.num_cells()));
  for (std::int64_t c = 0; c < grid.num_cells(); ++c) cell_sqrt.push_back(psd_sqrt(u.cell(c)));

  Matrix out(n, k);
  for_each_slot(grid, [&](DyadicInterval i) {
    const int base = static_cast<int>(haar_flat_index(grid, i)) * dim;
    const double height = 1.0 / std::sqrt(grid.length(i.level));
    for (std::int64_t cell = grid.cells_begin(i); cell < grid.cells_end(i); ++cell) {
      const double s = haar_sign(grid.depth(), i.level, cell) * height * root_w;
      const Matrix& h = cell_sqrt[static_cast<size_t>(cell)];
      const int row = static_cast<int>(cell) * dim;
      for (int r = 0; r < dim; ++r)
        for (int j = 0; j < dim; ++j) out(row + r, base + j) = s * h(r, j);
    }
  });
  return out;
}

Matrix weighted_analysis_matrix(const MatrixWeight& v) {
  const Grid& grid = v.grid();
  const int dim = v.dim();
  const int k = static_cast<int>(grid.num_haar()) * dim;
  const int n = static_cast<int>(grid.num_cells()) * dim;
  const double root_w = std::sqrt(grid.cell_width());

  std::vector<Matrix> cell_inv_sqrt;
  cell_inv_sqrt.reserve(static_cast<size_t>(grid.num_cells()));
  for (std::int64_t c = 0; c < grid.num_cells(); ++c)
    cell_inv_sqrt.push_back(psd_inv_sqrt(v.cell(c)));

  Matrix out(k, n);
  for_each_slot(grid, [&](DyadicInterval i) {
    const int row = static_cast<int>(haar_flat_index(grid, i)) * dim;
    const double height = 1.0 / std::sqrt(grid.length(i.level));
    for (std::int64_t cell = grid.cells_begin(i); cell < grid.cells_end(i); ++cell) {
      const double s = haar_sign(grid.depth(), i.level, cell) * height * root_w;
      const Matrix& h = cell_inv_sqrt[static_cast<size_t>(cell)];
      const int col = static_cast<int>(cell) * dim;
      for (int j = 0; j < dim; ++j)
        for (int m = 0; m < dim; ++m) out(row + j, col + m) = s * h(j, m);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// scans and bounds
// ---------------------------------------------------------------------------

namespace {

// Norm of synthesis * diag(signs) * analysis for one sign pattern.
double sigma_norm_from_factors(const Matrix& synthesis, const Matrix& analysis,
                               const std::vector<int>& signs, int dim) {
  Matrix scaled = synthesis;
  for (std::size_t s = 0; s < signs.size(); ++s) {
    if (signs[s] == 1) continue;
    const int base = static_cast<int>(s) * dim;
    for (int r = 0; r < scaled.rows(); ++r)
      for (int j = 0; j < dim; ++j) scaled(r, base + j) = -scaled(r, base + j);
  }
  return largest_singular_value(scaled * analysis);
}

}  // namespace

SigmaScanReport sigma_norm_scan(const MatrixWeight& u, const MatrixWeight& v, int num_random,
                                std::uint64_t seed) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "sigma_norm_scan: weights live on different spaces");
  require(u.grid().depth() >= 1, "sigma_norm_scan: grid needs at least one coefficient level");
  require(num_random >= 0, "sigma_norm_scan: negative draw count");

  const Grid& grid = u.grid();
  const int dim = u.dim();
  const auto num_slots = static_cast<std::size_t>(grid.num_haar());

  Matrix synthesis = weighted_synthesis_matrix(u);
  Matrix analysis = weighted_analysis_matrix(v);

  SigmaScanReport report;
  report.exhaustive = grid.depth() <= 3;

  std::vector<std::pair<std::string, std::vector<int>>> patterns;
  if (report.exhaustive) {
    const std::uint64_t count = std::uint64_t{1} << num_slots;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      std::vector<int> signs(num_slots, 1);
      for (std::size_t s = 0; s < num_slots; ++s)
        if ((mask >> s) & 1) signs[s] = -1;
      patterns.emplace_back("sigma_" + std::to_string(mask), std::move(signs));
    }
  } else {
    patterns.emplace_back("all_plus", std::vector<int>(num_slots, 1));
    std::vector<int> alt(num_slots);
    for (std::size_t s = 0; s < num_slots; ++s) {
      const DyadicInterval i = haar_unflatten(grid, static_cast<std::int64_t>(s));
      alt[s] = (i.level % 2 == 0) ? 1 : -1;
    }
    patterns.emplace_back("alt_level", std::move(alt));
    Rng rng(derive_seed(seed, "sigma_scan"));
    for (int d = 0; d < num_random; ++d) {
      std::vector<int> signs(num_slots);
      for (std::size_t s = 0; s < num_slots; ++s) signs[s] = rng.bit() ? 1 : -1;
      patterns.emplace_back("rand_" + std::to_string(d), std::move(signs));
    }
  }

  report.max_norm = 0.0;
  report.min_norm = 0.0;
  for (const auto& [id, signs] : patterns) {
    const double norm = sigma_norm_from_factors(synthesis, analysis, signs, dim);
    report.entries.push_back({id, norm});
    if (report.entries.size() == 1) {
      report.max_norm = report.min_norm = norm;
    } else {
      report.max_norm = std::max(report.max_norm, norm);
      report.min_norm = std::min(report.min_norm, norm);
    }
  }
  return report;
}

FactorizationBound factorization_bound(const MatrixWeight& u, const MatrixWeight& v) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "factorization_bound: weights live on different spaces");
  require(u.grid().depth() >= 1, "factorization_bound: grid needs a coefficient level");
  const Grid& grid = u.grid();
  const int dim = u.dim();

  MatrixWeight v_inv = v.inverse();
  BlockMultiplier blocks = avg_sqrt_multiplier(v_inv);
  BlockMultiplier inv_blocks = avg_inv_sqrt_multiplier(v_inv);

  // coefficient space -> field: remove the blocks, synthesize, apply V^{-1/2}.
  Matrix embed = assemble_coeff_to_field(
      [&](const HaarCoefficients& c) {
        return pointwise_weight_half(v, -1, haar_reconstruct(block_multiply(inv_blocks, c), grid));
      },
      grid, dim);

  // field -> coefficient space: apply U^{1/2}, analyze, insert the blocks.
  Matrix square = assemble_field_to_coeff(
      [&](const Field& g) {
        return block_multiply(blocks, haar_decompose(pointwise_weight_half(u, 1, g), grid));
      },
      grid, dim);

  FactorizationBound out;
  out.embedding_factor = largest_singular_value(embed);
  out.square_factor = largest_singular_value(square);
  out.product = out.embedding_factor * out.square_factor;
  return out;
}

double diagonal_product_norm(const MatrixWeight& u, const MatrixWeight& v) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "diagonal_product_norm: weights live on different spaces");
  MatrixWeight v_inv = v.inverse();
  const Grid& grid = u.grid();
  double best = 0.0;
  for (int level = 0; level <= grid.depth(); ++level) {
    for (std::int64_t k = 0; k < grid.num_intervals(level); ++k) {
      DyadicInterval i{level, k};
      best = std::max(best,
                      spectral_norm(psd_sqrt(v_inv.average(i)) * psd_sqrt(u.average(i))));
    }
  }
  return best;
}

namespace {

HaarCoefficients weighted_analysis_of(const MatrixWeight& u, const Field& f) {
  HaarCoefficients c = haar_decompose(pointwise_weight_half(u, 1, f), f.grid());
  std::fill(c.mean().begin(), c.mean().end(), 0.0);
  return c;
}

}  // namespace

DominationReport child_domination_check(const MatrixWeight& u, const MatrixWeight& v,
                                        ChildSide side, const Field& f) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "child_domination_check: weights live on different spaces");
  require(f.grid() == u.grid() && f.dim() == u.dim(),
          "child_domination_check: field lives on a different space");
  MatrixWeight v_inv = v.inverse();
  HaarCoefficients c = weighted_analysis_of(u, f);

  DominationReport out;
  out.lhs = block_multiply(child_avg_sqrt_multiplier(v_inv, side), c).squared_mass();
  const double base = block_multiply(avg_sqrt_multiplier(v_inv), c).squared_mass();
  out.beta = 1.0;
  out.scale = 2.0;
  out.rhs = out.scale * base;
  out.pass = out.lhs <= out.rhs + 1e-9;
  return out;
}

DominationReport offset_domination_check(const MatrixWeight& u, const MatrixWeight& v,
                                         const OffsetMap& offsets, const Field& f,
                                         std::uint64_t seed) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "offset_domination_check: weights live on different spaces");
  require(f.grid() == u.grid() && f.dim() == u.dim(),
          "offset_domination_check: field lives on a different space");
  const Grid& grid = u.grid();
  const int dim = u.dim();

  MatrixWeight v_inv = v.inverse();
  HaarCoefficients c = weighted_analysis_of(u, f);

  DominationReport out;
  out.lhs = block_multiply(offset_avg_sqrt_multiplier(v_inv, offsets), c).squared_mass();
  const double base = block_multiply(avg_sqrt_multiplier(v_inv), c).squared_mass();

  // Direction set for the doubling ratio: canonical basis, seeded sphere
  // samples, and the normalized coefficients that actually enter the norms.
  std::vector<Vec> directions;
  for (int j = 0; j < dim; ++j) {
    Vec e(static_cast<size_t>(dim), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    directions.push_back(std::move(e));
  }
  Rng rng(derive_seed(seed, "offset_domination"));
  for (int d = 0; d < 32; ++d) directions.push_back(rng.unit_vector(dim));
  for_each_slot(grid, [&](DyadicInterval i) {
    Vec x = slot_vec(c, i);
    double norm2 = 0.0;
    for (double t : x) norm2 += t * t;
    if (norm2 <= 0.0) return;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& t : x) t *= inv;
    directions.push_back(std::move(x));
  });

  int max_hops = 0;
  double beta = 1.0;
  for (const auto& [slot, target] : offsets) {
    max_hops = std::max(max_hops, tree_distance(grid, slot, target));
    const DyadicInterval anc = lowest_common_ancestor(grid, slot, target);
    if (anc == slot) continue;  // mass ratio is 1 when the slot is its own ancestor
    const Matrix a_slot = v_inv.average(slot);
    const Matrix a_anc = v_inv.average(anc);
    const double len_ratio = grid.length(slot.level) / grid.length(anc.level);
    for (const Vec& y : directions) {
      const Vec sy = a_slot.apply(y);
      const Vec ay = a_anc.apply(y);
      double num = 0.0, den = 0.0;
      for (int j = 0; j < dim; ++j) {
        num += sy[static_cast<size_t>(j)] * y[static_cast<size_t>(j)];
        den += ay[static_cast<size_t>(j)] * y[static_cast<size_t>(j)];
      }
      beta = std::min(beta, len_ratio * num / den);
    }
  }

  out.beta = beta;
  out.scale = std::ldexp(1.0, max_hops) / beta;
  out.rhs = out.scale * base;
  out.pass = out.lhs <= out.rhs + 1e-9;
  return out;
}

BandBoundReport band_domination_report(const MatrixWeight& u, const MatrixWeight& v,
                                       const BandSpec& band) {
  require(u.grid() == v.grid() && u.dim() == v.dim(),
          "band_domination_report: weights live on different spaces");
  require(band.grid() == u.grid(), "band_domination_report: band lives on a different grid");
  const Grid& grid = u.grid();
  const int dim = u.dim();

  MatrixWeight v_inv = v.inverse();
  Matrix synthesis = weighted_synthesis_matrix(u);
  Matrix analysis = weighted_analysis_matrix(v);
  Matrix band_matrix =
      assemble_coeff_op([&](const HaarCoefficients& c) { return band_apply(band, c); }, grid, dim);

  BandBoundReport out;
  out.phi_sup_value = phi_sup(band);
  out.unweighted_norm = largest_singular_value(band_matrix);
  out.weighted_norm = largest_singular_value(synthesis * (band_matrix * analysis));

  // field -> coefficients with the blocks removed, shared by every part.
  Matrix embed = block_diag_matrix(avg_inv_sqrt_multiplier(v_inv), grid, dim) * analysis;
  out.embedding_factor = largest_singular_value(embed);

  double parts_total = 0.0;
  for (const BandSpec& part : band_decompose(band)) {
    OffsetMap offsets;
    for (const BandEntry& e : part.entries()) offsets[e.target] = e.source;
    for_each_slot(grid, [&](DyadicInterval i) {
      if (!offsets.count(i)) offsets[i] = i;
    });

    Matrix d_part = block_diag_matrix(offset_avg_sqrt_multiplier(v_inv, offsets), grid, dim);
    const double factor = largest_singular_value(synthesis * d_part);
    Matrix part_matrix = assemble_coeff_op(
        [&](const HaarCoefficients& c) { return band_apply(part, c); }, grid, dim);
    const double part_norm = largest_singular_value(part_matrix);

    out.part_weighted_factors.push_back(factor);
    out.part_norms.push_back(part_norm);
    parts_total += factor * part_norm;
  }

  out.bound = parts_total * out.embedding_factor;
  out.pass = out.weighted_norm <= out.bound + 1e-9;
  return out;
}

}  // namespace matweight
