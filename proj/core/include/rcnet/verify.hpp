#pragma once

#include <cstdint>

#include "rcnet/net.hpp"
#include "rcnet/rcnet.hpp"
#include "rcnet/target.hpp"

namespace rcnet {

// What measure_errors should evaluate.
struct VerifySpec {
  int grid_per_dim = 0;          // points per axis for the grid sweep (0 = skip)
  std::int64_t mc_samples = 0;   // Monte Carlo sample count (0 = skip)
  double p = 2.0;                // L^p exponent for the Monte Carlo estimate
  std::uint64_t seed = 0x5EED;   // Monte Carlo stream seed
  int K = 0;                     // partition for the off-ramp split (0 = none)
  double delta = 0.0;            // ramp width for the split, input units
};

// Number of grid points per axis used by the standard sweeps: 4001 for d = 1,
// 201 for d = 2, 51 for d = 3 (endpoints included).
int default_grid_per_dim(int d);

struct ErrorReport {
  double sup_all = 0.0;             // max |net - f| over the grid
  double sup_off = 0.0;             // same, excluding ramp-band points
  std::int64_t grid_points = 0;
  std::int64_t grid_points_off = 0;
  double mc_lp = 0.0;               // (mean |net - f|^p)^(1/p) over MC samples
  double mc_se = 0.0;               // delta-method standard error of mc_lp
  std::int64_t mc_samples = 0;
};

// Compares the net against the target on a uniform grid (sup norms, with an
// optional off-ramp split) and by Monte Carlo (L^p norm with standard error,
// Kahan-compensated accumulation). Evaluation is batched; inert units of the
// block (all-zero rows with zero bias) are stripped from a working copy
// first, which does not change the function the net computes.
ErrorReport measure_errors(const RCNet& net, const TargetFunction& target,
                           const VerifySpec& spec);

// Removes hidden units whose incoming row and bias are identically zero
// (their activation is the constant 0, so the next layer's matching columns
// are dropped too). Repeats until stable. The computed function is unchanged;
// only hidden widths can shrink.
FeedForwardNet strip_inert_units(const FeedForwardNet& net);
RCNet strip_inert_units(const RCNet& net);

// d x (per_dim^d) matrix of grid points covering [0,1]^d, endpoints included.
Mat make_grid(int d, int per_dim);

}  // namespace rcnet
