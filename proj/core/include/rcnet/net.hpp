#pragma once

#include <vector>

#include "rcnet/affine.hpp"

namespace rcnet {

// Feed-forward ReLU network: affine maps with ReLU applied between
// consecutive layers (never after the last one).
//
//   f(x) = A_L( relu( A_{L-1}( ... relu( A_0(x) ) ... ) ) )
//
// depth = number of hidden (ReLU) layers = layers.size() - 1.
// A depth-0 net is a bare affine map. width = max hidden layer size
// (0 for depth-0 nets).
struct FeedForwardNet {
  std::vector<AffineMap> layers;

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }
  int depth() const { return static_cast<int>(layers.size()) - 1; }
  int width() const;

  void validate() const;
};

Vec eval_net(const FeedForwardNet& net, const Vec& x);
Mat eval_net_batch(const FeedForwardNet& net, const Mat& X);

// Wraps a single affine map as a depth-0 net.
FeedForwardNet affine_net(const AffineMap& a);

// (after o before)(x); the two affine maps at the junction are multiplied
// into one, so depths add: depth = after.depth + before.depth.
FeedForwardNet compose_nets(const FeedForwardNet& after, const FeedForwardNet& before);

// net o a  (precompose input affine).
FeedForwardNet with_pre(const FeedForwardNet& net, const AffineMap& a);
// a o net  (postcompose output affine).
FeedForwardNet with_post(const AffineMap& a, const FeedForwardNet& net);

// Increases depth to target_depth without changing the function on inputs
// whose output coordinates all stay >= -M: appends shift-by-M identity ReLU
// layers, then subtracts M at the end. Requires target_depth >= depth.
FeedForwardNet pad_depth(const FeedForwardNet& net, int target_depth, double M);

// Pads every hidden layer with inert zero units up to target_width.
FeedForwardNet pad_width_to(const FeedForwardNet& net, int target_width);

// Stacks nets that share one input: x |-> (f_1(x), ..., f_k(x)).
// All nets must have equal in_dim and equal depth.
FeedForwardNet stack_shared_input(const std::vector<FeedForwardNet>& nets);

// Stacks nets on disjoint consecutive input slices:
// (x_1, ..., x_k) |-> (f_1(x_1), ..., f_k(x_k)). Equal depth required.
FeedForwardNet stack_parallel(const std::vector<FeedForwardNet>& nets);

}  // namespace rcnet
