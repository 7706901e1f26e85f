#pragma once

#include "rcnet/rcnet.hpp"

namespace rcnet {

// Axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d].
struct IntervalBox {
  Vec lo, hi;

  IntervalBox() = default;
  IntervalBox(Vec lo_, Vec hi_);

  int dim() const { return static_cast<int>(lo.size()); }
  double max_abs() const;
  void validate() const;

  static IntervalBox cube(int d, double half_width);  // [-a, a]^d
  static IntervalBox point(const Vec& x);
  static IntervalBox concat(const IntervalBox& a, const IntervalBox& b);
};

struct NetBounds {
  IntervalBox out;
  // Upper bound on |z| over every pre-activation and every output entry.
  double max_abs_preact = 0.0;
};

// Interval image of an affine map, inflated by a sound floating-point
// evaluation slack per row.
IntervalBox bound_affine(const AffineMap& a, const IntervalBox& box);

// Sound output bounds for a ReLU net over a box.
//
// Rows are bounded two ways and intersected: the naive interval dot product,
// and a pairwise-cancellation refinement. Whenever a row consumes two units
// of the previous layer with exactly opposite coefficients (alpha, -alpha),
// the contribution alpha*(relu(z_i) - relu(z_j)) is bracketed through the
// range of z_i - z_j computed directly from the previous layer's rows; for
// near-parallel rows this is dramatically tighter than bounding each relu
// separately. Every row bound is widened by a floating-point evaluation
// slack, so the result also covers finite-precision evaluation.
NetBounds bound_net(const FeedForwardNet& net, const IntervalBox& box);

// Max of |pre-activation| and |output| bounds across the whole run
// (pre-affine, reps block applications, post-affine). Throws NumericError if
// the bounds blow up or turn non-finite.
double interval_bound(const RCNet& net, const IntervalBox& input_box);
double interval_bound(const FeedForwardNet& net, const IntervalBox& input_box);

}  // namespace rcnet
