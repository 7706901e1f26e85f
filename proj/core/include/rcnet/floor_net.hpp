#pragma once

#include <optional>

#include "rcnet/rcnet.hpp"

namespace rcnet {

// Parameters for an exact staircase net on [0, n]:
//   output = k  whenever  x in [k, k+1-delta] (k <= n-2)  or  x in [n-1, n].
// Outside those plateaus (inside the width-delta gaps) the output is
// unspecified but bounded. m >= n controls the repetition count (m-1); the
// extra repetitions are inert, so nets of different m compose in lockstep.
struct FloorNetSpec {
  int n = 1;
  int m = 1;
  double delta = 0.5;
};

// One shared block of the staircase construction: a 5-state, width-9,
// depth-1 ReLU net. State (s1..s5) = (k*y, k^2, k, y, acc); each application
// advances k by one and adds k * bump_k(y) to the accumulator, where bump_k
// is 1 on [k, k+1-delta], 0 outside (k-delta, k+1), and piecewise linear in
// between. Summed over k, the accumulator lands exactly on floor(y) on the
// plateaus.
FeedForwardNet build_hk_block(double delta);

// Staircase RCNet per FloorNetSpec: width 9, depth 1, block dimension 5,
// reps m-1. Input is squeezed by an affine map so that every plateau of the
// [0, n] staircase lands strictly inside a plateau of the internal block,
// keeping the outputs exact at plateau boundaries.
RCNet build_floor_rcnet(const FloorNetSpec& spec);

// Reference plateau classifier: returns k when x sits on plateau k of the
// (n, delta) staircase, nullopt inside a gap or outside [0, n].
std::optional<int> floor_plateau_oracle(double x, int n, double delta);

}  // namespace rcnet
