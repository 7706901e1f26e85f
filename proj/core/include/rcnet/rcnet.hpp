#pragma once

#include <utility>

#include "rcnet/net.hpp"

namespace rcnet {

// Repeated-composition network:
//
//   phi(x) = post( block^{o reps}( pre(x) ) )
//
// pre:   R^{d_in}    -> R^{d_block}   (affine)
// block: R^{d_block} -> R^{d_block}   (feed-forward ReLU net, applied reps times)
// post:  R^{d_block} -> R^{d_out}    (affine)
//
// reps = 0 means phi = post o pre.
struct RCNet {
  AffineMap pre;
  FeedForwardNet block;
  int reps = 0;
  AffineMap post;

  int d_in() const { return pre.in_dim(); }
  int d_block() const { return pre.out_dim(); }
  int d_out() const { return post.out_dim(); }
  int width() const { return block.width(); }
  int depth() const { return block.depth(); }

  void validate() const;
};

Vec eval_rcnet(const RCNet& net, const Vec& x);
Mat eval_rcnet_batch(const RCNet& net, const Mat& X);
// Convenience for d_out == 1.
double eval_rcnet_scalar(const RCNet& net, const Vec& x);

// Runs the explicit-Euler recursion z_{s+1} = z_s + delta * ((g(z_s) - z_s) / delta)
// alongside the direct iteration z_{s+1} = g(z_s) for S steps and returns
// (direct final state, Euler final state). With step size delta equal to the
// one used in the vector-field rewrite, the two recursions agree up to
// floating-point roundoff; the pair lets callers measure that gap.
std::pair<Vec, Vec> euler_flow_check(const FeedForwardNet& block, const Vec& z0,
                                     int steps, double delta);

}  // namespace rcnet
