#pragma once

// Haar-side operators: martingale transforms, block multipliers built from
// weight averages, the dyadic shift, banded coefficient maps, and the
// weighted realizations whose norms the scans measure.
//
// Every operator here acts on Haar coefficients and leaves the mean slot at
// zero. Weighted norms are norms of the unweighted realization
//     g  |->  U^{1/2} . op( analysis of V^{-1/2} g )
// over the full leaf-field space; that realization is what weighted_conjugate
// returns.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matweight/dyadic.hpp"
#include "matweight/weights.hpp"

namespace matweight {

// ---------------------------------------------------------------------------
// coefficient indexing
// ---------------------------------------------------------------------------

// Flat position of a coefficient-carrying interval: levels stacked coarse to
// fine, so flat = (2^level - 1) + index.
std::int64_t haar_flat_index(const Grid& grid, DyadicInterval i);
DyadicInterval haar_unflatten(const Grid& grid, std::int64_t flat);

// ---------------------------------------------------------------------------
// martingale transforms
// ---------------------------------------------------------------------------

// Signs per interval; unlisted intervals default to +1.
class SignPattern {
 public:
  SignPattern() = default;

  void set(DyadicInterval i, int sign);
  int at(DyadicInterval i) const;
  const std::map<DyadicInterval, int>& entries() const { return entries_; }

 private:
  std::map<DyadicInterval, int> entries_;
};

// Multiplies each Haar coefficient by its sign; the mean slot goes to zero.
HaarCoefficients martingale_transform(const SignPattern& sigma, const HaarCoefficients& c);

// ---------------------------------------------------------------------------
// block multipliers
// ---------------------------------------------------------------------------

// One matrix per coefficient-carrying interval, applied slotwise.
struct BlockMultiplier {
  std::map<DyadicInterval, Matrix> blocks;
};

// Applies the block of each interval to its coefficient; every interval with
// a coefficient slot must have a block.
HaarCoefficients block_multiply(const BlockMultiplier& m, const HaarCoefficients& c);

// Blocks <W>_I^{1/2} (averaged over I itself).
BlockMultiplier avg_sqrt_multiplier(const MatrixWeight& w);
// Blocks <W>_I^{-1/2}.
BlockMultiplier avg_inv_sqrt_multiplier(const MatrixWeight& w);

enum class ChildSide { left, right };

// Blocks <W>_{child of I}^{1/2}: the average moves to the chosen child.
BlockMultiplier child_avg_sqrt_multiplier(const MatrixWeight& w, ChildSide side);

using OffsetMap = std::map<DyadicInterval, DyadicInterval>;

// Blocks <W>_{offsets[I]}^{1/2}. The map must cover every coefficient slot
// and point inside the grid.
BlockMultiplier offset_avg_sqrt_multiplier(const MatrixWeight& w, const OffsetMap& offsets);

// W^{1/2} f (sign = +1) or W^{-1/2} f (sign = -1), cell by cell.
Field pointwise_weight_half(const MatrixWeight& w, int sign, const Field& f);

// ---------------------------------------------------------------------------
// dyadic shift
// ---------------------------------------------------------------------------

// out(I) = c(left child of I) - c(right child of I); intervals whose children
// are leaf cells output zero, and the mean slot stays zero.
HaarCoefficients dyadic_shift(const HaarCoefficients& c);

// The two halves of the shift: the named child's contribution only (the right
// child enters with its minus sign). Their sum is the full shift.
HaarCoefficients dyadic_shift_part(const HaarCoefficients& c, ChildSide side);

// ---------------------------------------------------------------------------
// banded coefficient maps
// ---------------------------------------------------------------------------

struct BandEntry {
  DyadicInterval source;
  DyadicInterval target;
  double value = 0.0;
};

// A finite sum  c(source) -> value * slot(target)  with every source/target
// pair within `radius` tree hops. Entries are validated and kept sorted
// (target-major) at construction.
class BandSpec {
 public:
  BandSpec(const Grid& grid, int radius, std::vector<BandEntry> entries);

  const Grid& grid() const { return grid_; }
  int radius() const { return radius_; }
  const std::vector<BandEntry>& entries() const { return entries_; }

 private:
  Grid grid_;
  int radius_;
  std::vector<BandEntry> entries_;
};

HaarCoefficients band_apply(const BandSpec& band, const HaarCoefficients& c);

// Largest |value| over the entries (0 for an empty band).
double phi_sup(const BandSpec& band);

// Splits a band into parts that hit each target slot at most once; the parts
// sum back to the input band. At most max-multiplicity parts are produced.
std::vector<BandSpec> band_decompose(const BandSpec& band);

// The shift written as a radius-1 band on a grid.
BandSpec shift_as_band(const Grid& grid);

// ---------------------------------------------------------------------------
// weighted realizations, assembly, norms
// ---------------------------------------------------------------------------

using CoeffOp = std::function<HaarCoefficients(const HaarCoefficients&)>;
using FieldOp = std::function<Field(const Field&)>;

// g |-> U^{1/2} . reconstruct( op( decompose( V^{-1/2} g ) ) ).
FieldOp weighted_conjugate(CoeffOp op, const MatrixWeight& u, const MatrixWeight& v);

// Matrix of a coefficient-space operator in the Haar basis (mean slot
// excluded); exact, column by column.
Matrix assemble_coeff_op(const CoeffOp& op, const Grid& grid, int dim);

// Matrix of a leaf-field operator in the orthonormal leaf basis.
Matrix assemble_field_op(const FieldOp& op, const Grid& grid, int dim);

// Rectangular assemblies between the two bases.
Matrix assemble_coeff_to_field(const std::function<Field(const HaarCoefficients&)>& op,
                               const Grid& grid, int dim);
Matrix assemble_field_to_coeff(const std::function<HaarCoefficients(const Field&)>& op,
                               const Grid& grid, int dim);

// Norm of the weighted realization of op (assembled, then power iteration).
double weighted_operator_norm(const CoeffOp& op, const MatrixWeight& u, const MatrixWeight& v);

// Synthesis with U^{1/2}: Haar basis in, leaf basis out. The matrix of
// c |-> U^{1/2} reconstruct(c).
Matrix weighted_synthesis_matrix(const MatrixWeight& u);

// Analysis with V^{-1/2}: leaf basis in, Haar basis out (mean dropped). The
// matrix of g |-> decompose(V^{-1/2} g).
Matrix weighted_analysis_matrix(const MatrixWeight& v);

// ---------------------------------------------------------------------------
// scans and bounds
// ---------------------------------------------------------------------------

struct SigmaScanEntry {
  std::string id;
  double norm = 0.0;
};

struct SigmaScanReport {
  std::vector<SigmaScanEntry> entries;
  double max_norm = 0.0;
  double min_norm = 0.0;
  bool exhaustive = false;  // all sign patterns enumerated (depth <= 3)
};

// Norms of the weighted martingale transforms over a family of sign
// patterns: all +1, alternating by level, and num_random seeded draws; at
// depth <= 3 the family is replaced by the full enumeration.
SigmaScanReport sigma_norm_scan(const MatrixWeight& u, const MatrixWeight& v, int num_random,
                                std::uint64_t seed);

struct FactorizationBound {
  double embedding_factor = 0.0;  // || M_V^{-1/2} . inverse-block multiplier ||
  double square_factor = 0.0;     // || block multiplier . M_U^{1/2} ||
  double product = 0.0;
};

// Two-factor bound dominating every weighted martingale transform norm: the
// blocks are the <V^{-1}> averages, inserted and removed around the signs.
FactorizationBound factorization_bound(const MatrixWeight& u, const MatrixWeight& v);

// sup over intervals of || <V^{-1}>_I^{1/2} <U>_I^{1/2} ||; its square is the
// joint A2 constant.
double diagonal_product_norm(const MatrixWeight& u, const MatrixWeight& v);

struct DominationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double beta = 1.0;   // measured doubling ratio (offset variant only)
  double scale = 2.0;  // factor applied to the base norm
  bool pass = false;
};

// || child-block multiplier applied to analysis of U^{1/2} f ||^2 against
// twice the aligned-block version; the factor 2 is exact for dyadic halves.
DominationReport child_domination_check(const MatrixWeight& u, const MatrixWeight& v,
                                        ChildSide side, const Field& f);

// Same comparison for an arbitrary offset map; the factor is 2^(max hop
// distance) / beta, with beta measured over sampled directions plus the
// actual coefficient directions.
DominationReport offset_domination_check(const MatrixWeight& u, const MatrixWeight& v,
                                         const OffsetMap& offsets, const Field& f,
                                         std::uint64_t seed = 0);

struct BandBoundReport {
  double weighted_norm = 0.0;   // || weighted realization of the band ||
  double bound = 0.0;           // sum_i part_factor_i * part_norm_i, times embedding
  double embedding_factor = 0.0;
  std::vector<double> part_weighted_factors;
  std::vector<double> part_norms;
  double phi_sup_value = 0.0;
  double unweighted_norm = 0.0;
  bool pass = false;
};

// Decomposes the band, bounds each part through its offset block multiplier,
// and compares with the directly assembled weighted norm.
BandBoundReport band_domination_report(const MatrixWeight& u, const MatrixWeight& v,
                                       const BandSpec& band);

}  // namespace matweight
