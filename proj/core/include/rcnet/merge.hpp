#pragma once

#include <utility>

#include "rcnet/interval.hpp"
#include "rcnet/rcnet.hpp"

namespace rcnet {

// Evidence produced while fusing two repeated stages into one shared block.
struct MergeCertificate {
  IntervalBox domain_box;   // input box the trajectory was certified over
  double bound_M = 0.0;     // phase-selector constant baked into the weights
  int merged_dims = 0;      // state dimension of the fused block
  int merged_reps = 0;      // repetitions of the fused block
  Vec state_scales;         // per-channel power-of-two internal scaling,
                            // one entry per fused-block channel (countdown
                            // channels carry scale 1)
  double state_sup = 0.0;   // certified sup |state| (natural units) over the run
  double t_shift = 0.0;     // power-of-two shift used by the countdown chain
  Vec state_caps;           // declared per-channel |state| invariants the range
                            // certification was conditioned on (natural units,
                            // payload channels only); empty when none were given
};

// Phase selector psi(u, v, s) = (u if s >= 1 else v, s), a width 2d+2,
// depth-1 net valid for |u_i|, |v_i| <= M and |s| >= 1:
//   phi_i = relu(u_i + M s) + relu(v_i - M s) - M relu(s) - M relu(-s).
FeedForwardNet build_selector(int d, double M);

// Fuses g2^{r2} o g1^{r1} (both R^d -> R^d blocks) into a single block Phi of
// dimension d+1 such that Phi^{r1+r2}(x, 2 r1 + 1) = (g2^{r2}(g1^{r1}(x)), 1 - 2 r2).
// The extra channel counts down by 2 each step and flips the selector from
// g1 to g2 at the phase boundary. Width(Phi) = N1 + N2 + 2d exactly (padded),
// depth = max(depth1, depth2, 1) + 1.
//
// Internally every state channel is rescaled by a power of two so that all
// payload magnitudes sit near one common scale before they meet the selector
// weights; the scaling conjugation is exact in floating point and is folded
// into the block's boundary layers, so the block maps natural units to
// natural units. The certificate records the scales, the selector constant M
// (a power of two, at least 100 * (r1 + r2 + 1), chosen after bounding every
// intermediate state over the given box), and the certified state sup.
//
// Requires r1 >= 0, r2 >= 1. The trajectory is certified over box0 (or
// [-A, A]^d for the scalar overload); evaluation outside it is undefined.
//
// Interval propagation alone cannot follow branch-driven dynamics (a state
// update that subtracts a threshold-selected constant doubles the interval
// every step even though the true value stays bounded). A caller that knows
// a per-channel invariant of its stage may declare it: cap1 bounds |state|
// on every step entered while stage 1 is active (including the input box),
// cap2 on every step entered after the handoff. Declared channels are
// clipped to the invariant during both certification passes, and the
// invariant is recorded in the certificate, which is then conditional on it.
// An exactly-tracked channel found outside its declared cap throws. Empty
// vectors (the default) declare nothing and leave the behavior purely
// interval-driven.
std::pair<FeedForwardNet, MergeCertificate> merge_two_stages(
    const FeedForwardNet& g1, int r1, const FeedForwardNet& g2, int r2,
    const IntervalBox& box0, const Vec& cap1 = Vec(), const Vec& cap2 = Vec());
std::pair<FeedForwardNet, MergeCertificate> merge_two_stages(
    const FeedForwardNet& g1, int r1, const FeedForwardNet& g2, int r2,
    double A = 1.0);

struct MergedNet {
  RCNet net;
  MergeCertificate cert;
  Vec block_state_cap;  // per-channel |state| bound for the fused block's
                        // whole run (natural units, one entry per block
                        // channel), derived from the declared stage caps;
                        // empty when no caps were declared
};

// Fuses a two-stage pipeline with interface affine maps into one RCNet:
//
//   x |-> L3( g2^{r2}( L2( g1^{r1}( L1(x) ) ) ) )
//
// L1: R^{d0} -> R^{d1}, g1 on R^{d1}, L2: R^{d1} -> R^{d2}, g2 on R^{d2},
// L3: R^{d2} -> R^{d3}. Both stages are embedded into a shared state space
// R^{dhat} (dhat >= max(d1, d2), default exactly that), L2 is realized as a
// one-shot width-2*d2 stage, and the two fusion levels above yield a block of
// dimension dhat + 2 applied r1 + r2 + 1 times. The block is padded to
// target_width, default N1 + N2 + 6*dhat + 2 (an upper bound on the natural
// width); depth = max(depth1 + 2, depth2 + 1) when depth1 >= 1.
//
// The trajectory is certified over [-A, A]^{d0}. cap1 (size d1) and cap2
// (size d2) optionally declare per-channel |state| invariants of the two
// stages (see merge_two_stages); they are threaded through both fusion
// levels, and the returned block_state_cap extends them to the fused block's
// channels so a later fusion can reuse the result as a capped stage.
MergedNet merge_with_affines(const AffineMap& L1, const FeedForwardNet& g1, int r1,
                             const AffineMap& L2, const FeedForwardNet& g2, int r2,
                             const AffineMap& L3, double A = 1.0, int dhat = -1,
                             int target_width = -1, const Vec& cap1 = Vec(),
                             const Vec& cap2 = Vec());

// Reference evaluation of the same pipeline by plain sequential iteration.
Vec sequential_pipeline_oracle(const AffineMap& L1, const FeedForwardNet& g1, int r1,
                               const AffineMap& L2, const FeedForwardNet& g2, int r2,
                               const AffineMap& L3, const Vec& x);

}  // namespace rcnet
