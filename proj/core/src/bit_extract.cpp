#include <cmath>
#include <string>
#include <utility>

#include "rcnet/bit_extract.hpp"

namespace rcnet {

BitString::BitString(std::vector<int> bits_) : bits(std::move(bits_)) { validate(); }

void BitString::validate() const {
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) {
      throw ValidationError("BitString: entry " + std::to_string(i) + " is not 0 or 1");
    }
    if (bits[i] == 1 && i >= static_cast<size_t>(kMaxBits)) {
      throw ValidationError("BitString: set bit at position " + std::to_string(i) +
                            " cannot be represented exactly (max " +
                            std::to_string(kMaxBits) + " bits)");
    }
  }
}

double BitString::encode() const {
  validate();
  double beta = 0.0;
  for (size_t i = bits.size(); i-- > 0;) {
    beta = (beta + static_cast<double>(bits[i])) / 2.0;
  }
  return beta;
}

int BitString::prefix_sum(int k) const {
  if (k < 0 || k > size()) {
    throw ValidationError("BitString::prefix_sum: k out of range");
  }
  int s = 0;
  for (int i = 0; i < k; ++i) s += bits[static_cast<size_t>(i)];
  return s;
}

FeedForwardNet build_bit_extract_block(int nbits, double scale) {
  if (nbits < 1 || nbits > kMaxBits) {
    throw ValidationError("build_bit_extract_block: nbits must lie in [1, " +
                          std::to_string(kMaxBits) + "]");
  }
  if (!(scale >= 1.0) || std::exp2(std::round(std::log2(scale))) != scale) {
    throw ValidationError("build_bit_extract_block: scale must be a power of two >= 1");
  }
  // Residual grid step, and the combined coefficient applied to the stored
  // (scale * residual) channel. Both are powers of two, so all threshold
  // arithmetic below is exact on dyadic residuals.
  const double inv_step = std::exp2(static_cast<double>(nbits));     // 1/step
  const double half_gap = std::exp2(static_cast<double>(nbits - 1)); // 1/(2 step)
  const double w_resid = inv_step / scale;

  // Hidden layer 1: 8 units over state (x1, x2, x3) = (countdown, scale*residual, prefix).
  Mat W1 = Mat::Zero(8, 3);
  Vec b1 = Vec::Zero(8);
  W1(0, 0) = 1.0;                                // v1 = relu(x1)
  W1(1, 0) = -1.0;                               // v2 = relu(-x1)
  W1(2, 1) = w_resid; b1(2) = 1.0 - half_gap;    // v3 = relu(resid/step - 1/(2 step) + 1)
  W1(3, 1) = w_resid; b1(3) = -half_gap;         // v4 = relu(resid/step - 1/(2 step))
  W1(4, 0) = 1.0; b1(4) = 1.0;                   // v5 = relu(x1 + 1)
  W1(5, 0) = 1.0;                                // v6 = relu(x1)
  W1(6, 1) = 1.0;                                // v7 = relu(x2)
  W1(7, 2) = 1.0;                                // v8 = relu(x3)

  // Hidden layer 2: 5 units. v3 - v4 is the peeled bit theta (exact on the
  // dyadic grid); v5 - v6 is the countdown gate 1{x1 >= 0} on integers.
  Mat W2 = Mat::Zero(5, 8);
  Vec b2 = Vec::Zero(5);
  W2(0, 0) = 1.0; W2(0, 1) = -1.0; b2(0) = -1.0;            // w1 = relu(x1 - 1)
  W2(1, 0) = -1.0; W2(1, 1) = 1.0; b2(1) = 1.0;             // w2 = relu(1 - x1)
  // w3 = relu(2 x2 - scale*theta + 2 scale (gate - 1)). While the countdown is
  // live (integer x1 >= 0) the gate terms cancel exactly; once it expires the
  // row saturates at zero, pinning the residual channel (and any accumulated
  // rounding noise, which the bare doubling recursion would amplify) to zero.
  W2(2, 6) = 2.0; W2(2, 2) = -scale; W2(2, 3) = scale;
  W2(2, 4) = 2.0 * scale; W2(2, 5) = -2.0 * scale; b2(2) = -2.0 * scale;
  W2(3, 2) = 1.0; W2(3, 3) = -1.0; W2(3, 4) = 1.0; W2(3, 5) = -1.0; b2(3) = -1.0;
                                                            // w4 = relu(theta + gate - 1)
  W2(4, 7) = 1.0;                                           // w5 = relu(x3)

  // Output affine: (x1 - 1, scale * new residual, prefix + gated bit).
  Mat W3 = Mat::Zero(3, 5);
  Vec b3 = Vec::Zero(3);
  W3(0, 0) = 1.0; W3(0, 1) = -1.0;   // x1' = w1 - w2 = x1 - 1
  W3(1, 2) = 1.0;                    // x2' = w3 = scale * (2 resid - theta)
  W3(2, 3) = 1.0; W3(2, 4) = 1.0;    // x3' = w4 + w5

  FeedForwardNet net;
  net.layers.emplace_back(std::move(W1), std::move(b1));
  net.layers.emplace_back(std::move(W2), std::move(b2));
  net.layers.emplace_back(std::move(W3), std::move(b3));
  net.validate();
  return net;
}

RCNet build_prefix_extract_rcnet(int r) {
  if (r < 1 || r > kMaxBits) {
    throw ValidationError("build_prefix_extract_rcnet: r must lie in [1, " +
                          std::to_string(kMaxBits) + "]");
  }
  Mat Wp = Mat::Zero(3, 2);
  Vec bp = Vec::Zero(3);
  Wp(0, 0) = 1.0; bp(0) = -1.0;  // countdown starts at k - 1
  Wp(1, 1) = 1.0;                // residual = encoded string
  // prefix starts at 0

  Mat Wo = Mat::Zero(1, 3);
  Wo(0, 2) = 1.0;

  RCNet net;
  net.pre = AffineMap(std::move(Wp), std::move(bp));
  net.block = build_bit_extract_block(r);
  net.reps = r;
  net.post = AffineMap(std::move(Wo), Vec::Zero(1));
  net.validate();
  return net;
}

double extract_prefix_sum(int r, int k, const BitString& s) {
  if (s.size() != r) {
    throw ValidationError("extract_prefix_sum: bit string length must equal r");
  }
  if (k < 0 || k > r) {
    throw ValidationError("extract_prefix_sum: k must lie in [0, r]");
  }
  if (r == kMaxBits && s.bits[static_cast<size_t>(kMaxBits - 1)] == 1) {
    // A full-length residual occupies all 53 significand bits; combining it
    // with the integer offsets of the peel step then needs a 54-bit sum, so
    // the first doubling would round and the error would be amplified by
    // every remaining step. Refuse instead of returning garbage.
    throw ValidationError(
        "extract_prefix_sum: a full-length (53-bit) string must end in a zero "
        "bit to stay exactly representable through the peel recursion");
  }
  const RCNet net = build_prefix_extract_rcnet(r);
  Vec x(2);
  x << static_cast<double>(k), s.encode();
  return eval_rcnet(net, x)(0);
}

BitDecomposition bit_decompose_values(const std::vector<double>& values, double epsilon) {
  if (values.empty()) {
    throw ValidationError("bit_decompose_values: values must be non-empty");
  }
  if (!(epsilon > 0.0)) {
    throw ValidationError("bit_decompose_values: epsilon must be positive");
  }
  if (values.size() > static_cast<size_t>(kMaxBits) + 1) {
    throw ValidationError("bit_decompose_values: at most " + std::to_string(kMaxBits + 1) +
                          " values are supported (step strings must stay exact)");
  }
  BitDecomposition dec;
  dec.a.reserve(values.size());
  for (size_t k = 0; k < values.size(); ++k) {
    const double y = values[k];
    if (!std::isfinite(y) || y < 0.0) {
      throw ValidationError("bit_decompose_values: values must be finite and >= 0");
    }
    const double q = std::floor(y / epsilon);
    if (!(std::abs(q) <= 4.5e15)) {
      throw NumericError("bit_decompose_values: value/epsilon ratio too large for exact grid index");
    }
    dec.a.push_back(static_cast<long long>(q));
  }
  dec.a0 = dec.a[0];
  std::vector<int> up(values.size() - 1, 0), down(values.size() - 1, 0);
  for (size_t k = 1; k < values.size(); ++k) {
    const long long step = dec.a[k] - dec.a[k - 1];
    if (step < -1 || step > 1) {
      throw ValidationError(
          "bit_decompose_values: consecutive values move more than one epsilon grid step");
    }
    if (step == 1) up[k - 1] = 1;
    if (step == -1) down[k - 1] = 1;
  }
  dec.up = BitString(std::move(up));
  dec.down = BitString(std::move(down));
  return dec;
}

RCNet build_point_fit_rcnet(const PointFitSpec& spec, double residual_scale) {
  const int n = static_cast<int>(spec.values.size());
  if (n < 1) throw ValidationError("build_point_fit_rcnet: values must be non-empty");
  const int m = spec.m == 0 ? n : spec.m;
  if (m < n) throw ValidationError("build_point_fit_rcnet: m must be >= number of values");
  if (n > kMaxBits + 1) {
    throw ValidationError("build_point_fit_rcnet: at most " + std::to_string(kMaxBits + 1) +
                          " values are supported (bit strings must stay exact)");
  }
  if (!(spec.epsilon >= 0.0) || !std::isfinite(spec.epsilon)) {
    throw ValidationError("build_point_fit_rcnet: epsilon must be finite and >= 0");
  }
  for (double y : spec.values) {
    if (!std::isfinite(y) || y < 0.0) {
      throw ValidationError("build_point_fit_rcnet: values must be finite and >= 0");
    }
  }

  const int nbits = std::max(n - 1, 1);
  const double S = residual_scale;

  double a0 = 0.0;
  double up_enc = 0.0, down_enc = 0.0;
  double eps = spec.epsilon;
  if (eps == 0.0) {
    for (double y : spec.values) {
      if (y != spec.values[0]) {
        throw ValidationError("build_point_fit_rcnet: epsilon 0 requires constant values");
      }
    }
  } else {
    BitDecomposition dec = bit_decompose_values(spec.values, eps);
    if (nbits == kMaxBits &&
        (dec.up.bits[static_cast<size_t>(kMaxBits - 1)] == 1 ||
         dec.down.bits[static_cast<size_t>(kMaxBits - 1)] == 1)) {
      // With 54 values the step strings are 53 bits long and the residual
      // channel uses the full double significand; a nonzero final move would
      // make the first peel round and the error would grow exponentially.
      throw ValidationError(
          "build_point_fit_rcnet: with 54 values the last value must repeat "
          "the second-to-last on the epsilon grid (final step must be zero)");
    }
    // Zero-pad the step strings out to m-1 moves (padded values repeat the
    // last one, so the extra moves are all zero).
    std::vector<int> up = dec.up.bits, down = dec.down.bits;
    up.resize(static_cast<size_t>(m - 1), 0);
    down.resize(static_cast<size_t>(m - 1), 0);
    up_enc = BitString(up).encode();
    down_enc = BitString(down).encode();
    a0 = static_cast<double>(dec.a0);
  }

  // pre(k) = (k-1, S*up_enc, 0, k-1, S*down_enc, 0).
  Mat Wp = Mat::Zero(6, 1);
  Vec bp = Vec::Zero(6);
  Wp(0, 0) = 1.0; bp(0) = -1.0;
  bp(1) = S * up_enc;
  Wp(3, 0) = 1.0; bp(3) = -1.0;
  bp(4) = S * down_enc;

  // Output affine: eps * (a0 + up_prefix - down_prefix).
  Mat Wo = Mat::Zero(1, 6);
  Wo(0, 2) = eps;
  Wo(0, 5) = -eps;
  Vec bo(1);
  bo(0) = eps == 0.0 ? spec.values[0] : eps * a0;

  RCNet net;
  net.pre = AffineMap(std::move(Wp), std::move(bp));
  net.block = stack_parallel(
      {build_bit_extract_block(nbits, S), build_bit_extract_block(nbits, S)});
  net.reps = m - 1;
  net.post = AffineMap(std::move(Wo), std::move(bo));
  net.validate();
  return net;
}

}  // namespace rcnet
