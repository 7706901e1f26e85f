#pragma once

#include <cstdint>
#include <vector>

#include "rcnet/bit_extract.hpp"
#include "rcnet/merge.hpp"
#include "rcnet/rcnet.hpp"
#include "rcnet/target.hpp"

namespace rcnet {

// Power-of-two scale applied to the residual channels of the table-walking
// stage. Keeping those channels near the common state magnitude preserves
// roughly twelve extra bits of headroom against phase-selection rounding.
inline constexpr double kResidualScale = 4096.0;

// Uniform partition of [0,1]^d into K^d cells; below every interior cell
// boundary a ramp band of width `delta` (in input units) is set aside where
// the cell locator interpolates instead of holding a plateau.
struct CubePartition {
  int d = 1;
  int K = 1;
  double delta = 0.0;

  std::int64_t num_cells() const;
  std::vector<int> cell_of(const Vec& x) const;  // containing cell, clamped
  bool in_trifling(const Vec& x) const;          // inside some ramp band
  void validate() const;
};

// Largest usable K per dimension (binary64 table resolution for d = 1,
// noise amplification of the table walk for d = 2, 3).
int grid_size_cap(int d);

// K = min(floor(r^(1/d)), grid_size_cap(d)), so K^d <= r always.
int choose_grid_size(int d, int r);

// Flags the columns of X (d x n) that lie in a ramp band.
std::vector<std::uint8_t> trifling_mask(const Mat& X, int K, double delta);

// Cell index in the interleaved enumeration: the last coordinate is the fast
// digit with weight 1, every slower digit has weight 2 K^(d-1-q), so adjacent
// cells differ by 1 and every digit carry jumps by exactly K + 1.
std::int64_t cell_enumeration_index(const std::vector<int>& beta, int d, int K);

// Affine R^{5d} -> R reading the d accumulator channels of the stacked cell
// locator into the enumeration index.
AffineMap base_k_index_map(int d, int K);

// Stage 1: x in [0,1]^d -> enumeration index of its cell (off the ramps).
// pre/block/reps locate the cell per coordinate; post is the index affine.
RCNet build_phi1(int d, int K, int r, double delta);

// Piecewise-linear value table over the enumeration axis: nodes at the used
// cell indices (exact target values), linear interpolation across the carry
// gaps, and a quantized +1/-1 oscillation filling the unused top samples.
// The oscillating guard tail keeps a set bit within reach of every residual
// suffix, so each bit decision of the table walk retains a noise margin with
// a data-independent floor instead of a possibly-zero data-dependent one.
struct PLTable {
  int n = 0;                   // number of samples (= 2 K^d)
  std::vector<double> values;  // h(0), ..., h(n-1), all >= 0
  double eps_step = 0.0;       // bound on adjacent sample gaps (0 = constant)
  std::vector<std::int64_t> node_s;
  std::vector<double> node_value;
};

PLTable build_pl_table(const TargetFunction& target, int K, double shift);

// Stage 2: enumeration index -> quantized table value (a table-walking net).
RCNet build_phi2(const PLTable& table, int m, double residual_scale = kResidualScale);

struct GapNetReport {
  int K = 0;
  double delta = 0.0;      // ramp width in input units
  double shift = 0.0;      // additive lift applied before table building
  double eps_step = 0.0;   // quantization step of the value table
  double off_trifling_bound = 0.0;  // sup-error bound away from the ramp bands
  MergeCertificate cert;
};

struct GapNet {
  RCNet net;
  GapNetReport report;
  PLTable table;  // the value table the net walks (kept for diagnostics)
};

// Cell-locator + table-walk composition: approximates `target` everywhere
// except on the ramp bands. Pass delta <= 0 to use the default 1/(3K).
// Block shape: width 39d + 24, depth 3, dims 5d + 3, reps 3r - 1.
GapNet build_gap_rcnet(const TargetFunction& target, int r, double delta = -1.0);

// One-dimensional block clamping its input to [-bound, bound]; width 4, depth 2.
FeedForwardNet build_clip_net(double bound);

struct LpNet {
  RCNet net;
  GapNetReport gap;
  double p = 2.0;
  double clip_bound = 0.0;
  // Certified bound: off-ramp sup error plus the ramp-band L^p contribution.
  // When K is repetition-limited this is at most 6 sqrt(d) omega(r^(-1/d)).
  double bound_lp = 0.0;
};

// Gap net merged with an output clamp; the ramp width is shrunk until the
// ramp bands cannot contribute more than omega(r^(-1/d)) to the L^p norm.
// Block shape: width 69d + 48, depth 5, dims 5d + 5, reps 3r + 1.
LpNet build_lp_rcnet(const TargetFunction& target, int r, double p);

// Median-of-three selector: width 6, depth 2, inputs (a, b, c) -> median.
FeedForwardNet build_mid_net();

struct LinfNet {
  RCNet net;
  GapNetReport gap;
  double probe_offset = 0.0;  // +- shift of the three probe evaluations
  double bound_sup = 0.0;     // sup-error bound on all of [0,1]
};

// Three probe copies of the gap net at x - h, x, x + h fused through the
// median block: at most one probe can sit in a ramp band, so the median obeys
// the off-ramp bound plus omega(h) on the whole cube. One-dimensional.
// Block shape: width 3N + 18D + 16, depth 5, dims 26, reps 3r + 1.
LinfNet build_linf_rcnet(const TargetFunction& target, int r);

}  // namespace rcnet
