#pragma once

#include <vector>

#include "rcnet/rcnet.hpp"

namespace rcnet {

// Binary strings longer than this cannot be encoded exactly in a double,
// so every bit-driven construction in this library is capped here.
inline constexpr int kMaxBits = 53;

// A 0/1 string; bits[0] is the most significant bit of the encoding
//   encode() = sum_i bits[i] * 2^{-(i+1)}.
// The encoding (and all arithmetic built on it) is exact in double precision
// as long as no bit beyond position kMaxBits-1 is set.
struct BitString {
  std::vector<int> bits;

  BitString() = default;
  explicit BitString(std::vector<int> bits_);

  int size() const { return static_cast<int>(bits.size()); }
  void validate() const;

  // Exact dyadic encoding via tail-first Horner evaluation.
  double encode() const;
  // Number of ones among the first k bits (0 <= k <= size()).
  int prefix_sum(int k) const;
};

// Shared block of the prefix-sum extractor, as a 3-state, width-8, depth-2
// ReLU net. State (countdown, scale*residual, prefix). Each application
// peels the leading bit off the residual (threshold test against 1/2),
// doubles the remainder, decrements the countdown, and adds the peeled bit
// to the prefix while the countdown is still >= 0.
//
// nbits sets the residual grid 2^-nbits (1 <= nbits <= kMaxBits). `scale`
// must be a power of two >= 1; the residual channel is carried as
// scale * residual with identical exact semantics (used to rebalance channel
// magnitudes inside larger assemblies).
FeedForwardNet build_bit_extract_block(int nbits, double scale = 1.0);

// Full extractor: phi(k, v) with v = s.encode() returns the number of ones
// among the first k bits, exactly. Pre (k, v) -> (k-1, v, 0), reps = r,
// post reads the prefix channel.
//
// Exactness envelope: every intermediate of the peel recursion stays exactly
// representable for r <= kMaxBits - 1, and for r == kMaxBits when the final
// bit of the string is zero. A full-length string with its final bit set
// fills all 53 significand bits of the residual, so the first doubling
// rounds and the error compounds; extract_prefix_sum rejects that case.
RCNet build_prefix_extract_rcnet(int r);

// Convenience wrapper: builds the r-bit extractor and evaluates it at
// (k, s.encode()). Requires s.size() == r and 0 <= k <= r, and when
// r == kMaxBits the final bit of s must be zero (see above).
double extract_prefix_sum(int r, int k, const BitString& s);

// A sequence y_0..y_{n-1} of non-negative values to fit on the epsilon-grid:
// the net reproduces epsilon * floor(y_k / epsilon) at input k. Requires
// |y_k - y_{k-1}| <= epsilon (so grid indices move by at most one step) and
// n <= kMaxBits + 1; when n == kMaxBits + 1 the final grid step must be zero
// (the step strings are then full-length, see build_prefix_extract_rcnet).
// epsilon == 0 is allowed for constant sequences. m >= n sets the repetition
// count (m - 1); values are padded by repeating the last one, which adds
// inert zero bits.
struct PointFitSpec {
  std::vector<double> values;
  double epsilon = 0.0;
  int m = 0;  // 0 means m = values.size()
};

// Grid decomposition of a value sequence: a[k] = floor(y_k / epsilon),
// and the +1/-1 steps split into two 0/1 strings with a[k] - a[k-1] =
// up.bits[k-1] - down.bits[k-1]. Accepts at most kMaxBits + 1 values so the
// step strings stay within the exact encoding range.
struct BitDecomposition {
  long long a0 = 0;
  std::vector<long long> a;
  BitString up, down;
};

BitDecomposition bit_decompose_values(const std::vector<double>& values, double epsilon);

// Point-fitting RCNet: width 16, depth 2, block dimension 6, reps m-1.
// Two parallel extractors recover the counts of up and down steps among the
// first k grid moves; the output affine rebuilds epsilon * a_k from them.
// residual_scale (a power of two >= 1) rescales the two residual channels
// internally without changing the computed function.
RCNet build_point_fit_rcnet(const PointFitSpec& spec, double residual_scale = 1.0);

}  // namespace rcnet
