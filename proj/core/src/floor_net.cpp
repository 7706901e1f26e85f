#include <cmath>
#include <string>

#include "rcnet/floor_net.hpp"

namespace rcnet {

FeedForwardNet build_hk_block(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("build_hk_block: delta must lie in (0, 1)");
  }
  const double q = 1.0 / delta;

  // Hidden layer: 9 units over state (s1, s2, s3, s4, s5).
  Mat W1 = Mat::Zero(9, 5);
  Vec b1 = Vec::Zero(9);
  W1(0, 0) = 1.0; W1(0, 3) = 1.0;             // u1 = relu(s1 + s4)       -> (k+1)*y
  W1(1, 1) = 1.0; W1(1, 2) = 2.0; b1(1) = 1;  // u2 = relu(s2 + 2 s3 + 1) -> (k+1)^2
  W1(2, 2) = 1.0;                             // u3 = relu(s3)            -> k
  W1(3, 3) = 1.0;                             // u4 = relu(s4)            -> y
  W1(4, 4) = 1.0;                             // u5 = relu(s5)            -> acc
  W1(5, 0) = q;  W1(5, 1) = -q; W1(5, 2) = 1.0;  // u6 = relu(k(y-k)/delta + k)
  W1(6, 0) = q;  W1(6, 1) = -q;                  // u7 = relu(k(y-k)/delta)
  W1(7, 0) = -q; W1(7, 1) = q;  W1(7, 2) = q;        // u8 = relu(k(k+1-y)/delta)
  W1(8, 0) = -q; W1(8, 1) = q;  W1(8, 2) = q - 1.0;  // u9 = relu(k(k+1-y)/delta - k)

  // Output affine: next state.
  //   s1' = u1, s2' = u2, s3' = u3 + 1, s4' = u4,
  //   s5' = u5 + (u6 - u7) + (u8 - u9) - u3
  // where u6-u7 = k * ramp_up(k-delta, k) and u8-u9 = k * ramp_down(k+1-delta, k+1),
  // so s5 gains k exactly on [k, k+1-delta] and nothing outside (k-delta, k+1).
  Mat W2 = Mat::Zero(5, 9);
  Vec b2 = Vec::Zero(5);
  W2(0, 0) = 1.0;
  W2(1, 1) = 1.0;
  W2(2, 2) = 1.0; b2(2) = 1.0;
  W2(3, 3) = 1.0;
  W2(4, 4) = 1.0;
  W2(4, 5) = 1.0; W2(4, 6) = -1.0;
  W2(4, 7) = 1.0; W2(4, 8) = -1.0;
  W2(4, 2) = -1.0;

  FeedForwardNet net;
  net.layers.emplace_back(std::move(W1), std::move(b1));
  net.layers.emplace_back(std::move(W2), std::move(b2));
  net.validate();
  return net;
}

RCNet build_floor_rcnet(const FloorNetSpec& spec) {
  if (spec.n < 1) throw ValidationError("build_floor_rcnet: n must be >= 1");
  if (spec.m < spec.n) throw ValidationError("build_floor_rcnet: m must be >= n");
  if (!(spec.delta > 0.0 && spec.delta < 1.0)) {
    throw ValidationError("build_floor_rcnet: delta must lie in (0, 1)");
  }
  const double n = static_cast<double>(spec.n);
  const double delta = spec.delta;
  // Inner plateau gap; the squeeze map sends [0, n] into [tilde, n - tilde]
  // territory so plateau endpoints stay strictly inside inner plateaus.
  const double tilde = (1.0 - delta) * delta / n;
  const double slope = (n - delta - tilde) / n;
  const double inter = delta;

  // pre(x) = (L0(x), 1, 1, L0(x), 0) with L0(x) = slope * x + inter.
  Mat Wp = Mat::Zero(5, 1);
  Vec bp = Vec::Zero(5);
  Wp(0, 0) = slope; bp(0) = inter;
  bp(1) = 1.0;
  bp(2) = 1.0;
  Wp(3, 0) = slope; bp(3) = inter;

  Mat Wo = Mat::Zero(1, 5);
  Wo(0, 4) = 1.0;

  RCNet net;
  net.pre = AffineMap(std::move(Wp), std::move(bp));
  net.block = build_hk_block(tilde);
  net.reps = spec.m - 1;
  net.post = AffineMap(std::move(Wo), Vec::Zero(1));
  net.validate();
  return net;
}

std::optional<int> floor_plateau_oracle(double x, int n, double delta) {
  if (n < 1) throw ValidationError("floor_plateau_oracle: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("floor_plateau_oracle: delta must lie in (0, 1)");
  }
  if (!(x >= 0.0) || x > static_cast<double>(n)) return std::nullopt;
  int k = static_cast<int>(std::floor(x));
  if (k > n - 1) k = n - 1;
  if (k <= n - 2) {
    const double upper = static_cast<double>(k) + 1.0 - delta;
    if (x > upper) return std::nullopt;
  }
  return k;
}

}  // namespace rcnet
