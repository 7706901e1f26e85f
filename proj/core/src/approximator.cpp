#include "rcnet/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rcnet/errors.hpp"
#include "rcnet/floor_net.hpp"
#include "rcnet/net.hpp"

namespace rcnet {
namespace {

std::int64_t ipow64(std::int64_t base, int exp) {
  std::int64_t out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

double ulp_of(double x) { return std::ldexp(1.0, std::ilogb(std::abs(x)) - 52); }

// Advances beta lexicographically over {0..K-1}^d; false once exhausted.
bool next_multi_index(std::vector<int>& beta, int K) {
  for (int i = static_cast<int>(beta.size()) - 1; i >= 0; --i) {
    if (++beta[i] < K) return true;
    beta[i] = 0;
  }
  return false;
}

Vec corner_point(const std::vector<int>& beta, int K) {
  Vec x(static_cast<int>(beta.size()));
  for (int i = 0; i < x.size(); ++i)
    x(i) = static_cast<double>(beta[static_cast<std::size_t>(i)]) / K;
  return x;
}

// Verifies that every live bit decision of the table walk keeps a noise
// margin dominating the phase-selection rounding the certificate implies.
// The residual at peel step k is the dyadic suffix 0.b_k b_{k+1}...; the walk
// reads bit k off it against a threshold at 1/2 (bit 1 side) with a one-step
// plateau edge at 1/2 - 2^-nbits (bit 0 side). Per-step channel noise is
// bounded by a few ulp of the selector junction magnitude, unscaled through
// the channel normalization and the residual pre-scale; the doubling
// recursion amplifies step-0 noise by 2^k by step k.
void check_table_margins(const PLTable& table, int K, const MergeCertificate& cert,
                         const std::vector<int>& resid_coords) {
  if (table.eps_step <= 0.0) return;
  const std::int64_t live = static_cast<std::int64_t>(table.n) - K - 1;
  if (live <= 0) return;
  const BitDecomposition dec = bit_decompose_values(table.values, table.eps_step);
  double scale_min = std::numeric_limits<double>::infinity();
  for (int c : resid_coords)
    scale_min = std::min(scale_min, cert.state_scales(c));
  const double nu =
      8.0 * ulp_of(cert.bound_M * cert.t_shift) / (scale_min * kResidualScale);
  if (std::getenv("RCNET_MERGE_DEBUG") != nullptr)
    std::fprintf(stderr,
                 "[table-margins] M=%g t_shift=%g scale_min=%g nu=%g live=%lld\n",
                 cert.bound_M, cert.t_shift, scale_min,
                 nu, static_cast<long long>(live));
  const int nbits = dec.up.size();
  const double plateau_edge = 0.5 - std::ldexp(1.0, -nbits);
  for (const BitString* s : {&dec.up, &dec.down}) {
    const std::int64_t depth = std::min<std::int64_t>(live, s->size());
    for (std::int64_t k = 0; k < depth; ++k) {
      double resid = 0.0;
      for (int i = s->size(); i > k; --i)
        resid = (resid + s->bits[static_cast<std::size_t>(i - 1)]) * 0.5;
      const double margin =
          s->bits[static_cast<std::size_t>(k)] == 1 ? resid - 0.5 : plateau_edge - resid;
      const double budget = 24.0 * nu * std::ldexp(1.0, static_cast<int>(k));
      if (margin < budget)
        throw NumericError("value table bit margin at step " + std::to_string(k) +
                           " is " + std::to_string(margin) +
                           ", below the certified noise budget " +
                           std::to_string(budget));
    }
  }
}

// Evaluates the assembled net at every cell corner and compares against the
// quantized table value the construction is supposed to reproduce there.
void verify_cell_corners(const RCNet& net, const TargetFunction& target,
                         const PLTable& table, int K, double shift) {
  const int d = target.d;
  std::vector<long long> a;
  if (table.eps_step > 0.0)
    a = bit_decompose_values(table.values, table.eps_step).a;
  std::vector<int> beta(static_cast<std::size_t>(d), 0);
  do {
    const Vec x = corner_point(beta, K);
    const std::int64_t j = cell_enumeration_index(beta, d, K);
    const double expected =
        table.eps_step > 0.0
            ? table.eps_step * static_cast<double>(a[static_cast<std::size_t>(j)]) +
                  (target.f0 - shift)
            : table.values.front() + (target.f0 - shift);
    const double got = eval_rcnet_scalar(net, x);
    if (!(std::abs(got - expected) <= 1e-6 * std::max(1.0, std::abs(expected))))
      throw NumericError("assembled net disagrees with its value table at cell " +
                         std::to_string(j) + ": expected " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  } while (next_multi_index(beta, K));
}

}  // namespace

std::int64_t CubePartition::num_cells() const { return ipow64(K, d); }

void CubePartition::validate() const {
  if (d < 1) throw ValidationError("partition dimension must be positive");
  if (K < 1) throw ValidationError("grid size must be positive");
  if (!(delta >= 0.0) || !(static_cast<double>(K) * delta < 1.0))
    throw ValidationError("ramp width must satisfy 0 <= K*delta < 1");
}

std::vector<int> CubePartition::cell_of(const Vec& x) const {
  validate();
  if (x.size() != d) throw ValidationError("point dimension does not match the partition");
  std::vector<int> beta(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < d; ++i) {
    const double y = static_cast<double>(K) * x(i);
    int k = static_cast<int>(std::floor(y));
    k = std::max(0, std::min(K - 1, k));
    beta[static_cast<std::size_t>(i)] = k;
  }
  return beta;
}

bool CubePartition::in_trifling(const Vec& x) const {
  validate();
  if (x.size() != d) throw ValidationError("point dimension does not match the partition");
  for (int i = 0; i < d; ++i) {
    const double y = static_cast<double>(K) * x(i);
    const int k = static_cast<int>(std::floor(y));
    if (k < 0 || k > K - 2) continue;
    if (y > static_cast<double>(k + 1) - static_cast<double>(K) * delta) return true;
  }
  return false;
}

int grid_size_cap(int d) {
  switch (d) {
    case 1:
      return 27;
    case 2:
      return 4;
    case 3:
      return 2;
    default:
      throw ValidationError("constructions support dimensions 1 to 3 only");
  }
}

int choose_grid_size(int d, int r) {
  const int cap = grid_size_cap(d);
  if (r < 1) throw ValidationError("repetition budget must be at least 1");
  int K = 1;
  while (K < cap && ipow64(K + 1, d) <= r) ++K;
  return K;
}

std::vector<std::uint8_t> trifling_mask(const Mat& X, int K, double delta) {
  CubePartition part{static_cast<int>(X.rows()), K, delta};
  part.validate();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(X.cols()), 0);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Vec x = X.col(c);
    mask[static_cast<std::size_t>(c)] = part.in_trifling(x) ? 1 : 0;
  }
  return mask;
}

std::int64_t cell_enumeration_index(const std::vector<int>& beta, int d, int K) {
  if (static_cast<int>(beta.size()) != d)
    throw ValidationError("cell multi-index has the wrong dimension");
  for (int b : beta)
    if (b < 0 || b >= K) throw ValidationError("cell multi-index entry out of range");
  std::int64_t j = beta[static_cast<std::size_t>(d - 1)];
  for (int q = 0; q <= d - 2; ++q)
    j += 2 * ipow64(K, d - 1 - q) * beta[static_cast<std::size_t>(q)];
  return j;
}

AffineMap base_k_index_map(int d, int K) {
  grid_size_cap(d);
  if (K < 1) throw ValidationError("grid size must be positive");
  Mat W = Mat::Zero(1, 5 * d);
  for (int q = 0; q <= d - 2; ++q)
    W(0, 5 * q + 4) = 2.0 * static_cast<double>(ipow64(K, d - 1 - q));
  W(0, 5 * (d - 1) + 4) = 1.0;
  return AffineMap{W, Vec::Zero(1)};
}

RCNet build_phi1(int d, int K, int r, double delta) {
  grid_size_cap(d);
  if (K < 1) throw ValidationError("grid size must be positive");
  if (!(delta > 0.0) || !(static_cast<double>(K) * delta < 1.0))
    throw ValidationError("ramp width must satisfy 0 < K*delta < 1");
  const RCNet fl = build_floor_rcnet({K, r, static_cast<double>(K) * delta});
  AffineMap pre;
  std::vector<FeedForwardNet> blocks;
  blocks.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Mat Wi = Mat::Zero(1, d);
    Wi(0, i) = static_cast<double>(K);
    const AffineMap lane = compose(fl.pre, AffineMap{Wi, Vec::Zero(1)});
    pre = (i == 0) ? lane : vstack(pre, lane);
    blocks.push_back(fl.block);
  }
  RCNet out{pre, stack_parallel(blocks), fl.reps, base_k_index_map(d, K)};
  out.validate();
  return out;
}

PLTable build_pl_table(const TargetFunction& target, int K, double shift) {
  target.validate();
  const int d = target.d;
  grid_size_cap(d);
  if (K < 1) throw ValidationError("grid size must be positive");
  const std::int64_t n64 = 2 * ipow64(K, d);
  if (n64 > static_cast<std::int64_t>(kMaxBits) + 1)
    throw ValidationError("table resolution exceeds the exact dyadic range");
  PLTable t;
  t.n = static_cast<int>(n64);

  std::vector<int> beta(static_cast<std::size_t>(d), 0);
  do {
    const std::int64_t s = cell_enumeration_index(beta, d, K);
    const double v = (target.f(corner_point(beta, K)) - target.f0) + shift;
    if (v < -1e-9)
      throw ValidationError("additive lift leaves negative table values");
    t.node_s.push_back(s);
    t.node_value.push_back(std::max(0.0, v));
  } while (next_multi_index(beta, K));

  const std::int64_t jmax = n64 - K - 1;
  if (t.node_s.front() != 0 || t.node_s.back() != jmax)
    throw NumericError("cell enumeration does not span the expected index range");

  t.values.assign(static_cast<std::size_t>(t.n), 0.0);
  std::size_t seg = 0;
  for (std::int64_t s = 0; s <= jmax; ++s) {
    while (seg + 1 < t.node_s.size() && t.node_s[seg + 1] <= s) ++seg;
    if (t.node_s[seg] == s) {
      t.values[static_cast<std::size_t>(s)] = t.node_value[seg];
    } else {
      const double s0 = static_cast<double>(t.node_s[seg]);
      const double s1 = static_cast<double>(t.node_s[seg + 1]);
      const double v0 = t.node_value[seg];
      const double v1 = t.node_value[seg + 1];
      t.values[static_cast<std::size_t>(s)] =
          v0 + (v1 - v0) * ((static_cast<double>(s) - s0) / (s1 - s0));
    }
  }

  double eps_raw = 0.0;
  for (std::int64_t s = 0; s < jmax; ++s)
    eps_raw = std::max(eps_raw, std::abs(t.values[static_cast<std::size_t>(s + 1)] -
                                         t.values[static_cast<std::size_t>(s)]));
  if (eps_raw == 0.0) {
    for (std::int64_t s = jmax + 1; s < n64; ++s)
      t.values[static_cast<std::size_t>(s)] = t.values[static_cast<std::size_t>(jmax)];
    t.eps_step = 0.0;
    return t;
  }
  // Inflate the step bound so every used gap is strictly below one quantum.
  t.eps_step = eps_raw * (1.0 + std::ldexp(1.0, -40));

  // Guard tail: hold one flat step past the last used sample, then oscillate
  // by exactly one quantum, centered on half-quantum values so the floor
  // quantization of the tail is unambiguous.
  const long long a_base =
      static_cast<long long>(std::floor(t.values[static_cast<std::size_t>(jmax)] / t.eps_step));
  for (std::int64_t s = jmax + 1; s < n64; ++s) {
    const std::int64_t i = s - jmax;
    const double level = static_cast<double>(a_base) + ((i % 2 == 0) ? 1.0 : 0.0) + 0.5;
    t.values[static_cast<std::size_t>(s)] = t.eps_step * level;
  }
  return t;
}

RCNet build_phi2(const PLTable& table, int m, double residual_scale) {
  PointFitSpec spec;
  spec.values = table.values;
  spec.epsilon = table.eps_step;
  spec.m = m;
  return build_point_fit_rcnet(spec, residual_scale);
}

GapNet build_gap_rcnet(const TargetFunction& target, int r, double delta) {
  target.validate();
  const int d = target.d;
  grid_size_cap(d);
  if (r < 1) throw ValidationError("repetition budget must be at least 1");
  const int K = choose_grid_size(d, r);
  const double delta_max = 1.0 / (3.0 * K);
  if (delta <= 0.0) delta = delta_max;
  if (delta > delta_max * (1.0 + 1e-12))
    throw ValidationError("ramp width must not exceed 1/(3K)");
  const double root_d = std::sqrt(static_cast<double>(d));
  const double omega_diag = target.omega(root_d);
  if (!(omega_diag >= 0.0) || !std::isfinite(omega_diag))
    throw ValidationError("modulus bound must be finite and nonnegative");

  // Additive lift keeping every table value nonnegative even when the
  // modulus is only an estimate.
  double min_rel = 0.0;
  {
    std::vector<int> beta(static_cast<std::size_t>(d), 0);
    do {
      min_rel = std::min(min_rel, target.f(corner_point(beta, K)) - target.f0);
    } while (next_multi_index(beta, K));
  }
  const double shift = std::max(omega_diag, -min_rel);

  PLTable table = build_pl_table(target, K, shift);
  const RCNet phi1 = build_phi1(d, K, r, delta);
  const RCNet phi2 = build_phi2(table, 2 * r, kResidualScale);
  const AffineMap L2 = compose(phi2.pre, phi1.post);
  AffineMap L3 = phi2.post;
  L3.b(0) += target.f0 - shift;

  MergedNet merged =
      merge_with_affines(phi1.pre, phi1.block, phi1.reps, L2, phi2.block, phi2.reps,
                         L3, 1.0, 5 * d + 1, 39 * d + 24);
  check_table_margins(table, K, merged.cert, {1, 4});
  verify_cell_corners(merged.net, target, table, K, shift);

  GapNet out;
  out.net = std::move(merged.net);
  out.report.K = K;
  out.report.delta = delta;
  out.report.shift = shift;
  out.report.eps_step = table.eps_step;
  out.report.off_trifling_bound = table.eps_step + target.omega(root_d / K) + 1e-9;
  out.report.cert = std::move(merged.cert);
  out.table = std::move(table);
  return out;
}

FeedForwardNet build_clip_net(double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw ValidationError("clip bound must be positive and finite");
  Mat W1(1, 1);
  W1 << 1.0;
  Vec b1(1);
  b1 << bound;
  Mat W2(4, 1);
  W2 << 1.0, -1.0, 1.0, -1.0;
  Vec b2(4);
  b2 << 2.0 * bound, -2.0 * bound, -2.0 * bound, 2.0 * bound;
  Mat W3(1, 4);
  W3 << 0.5, -0.5, -0.5, -0.5;
  Vec b3(1);
  b3 << -bound;
  FeedForwardNet net{{AffineMap{W1, b1}, AffineMap{W2, b2}, AffineMap{W3, b3}}};
  net.validate();
  return net;
}

LpNet build_lp_rcnet(const TargetFunction& target, int r, double p) {
  target.validate();
  if (!(p >= 1.0) || !std::isfinite(p))
    throw ValidationError("norm exponent must satisfy 1 <= p < infinity");
  if (r < 1) throw ValidationError("repetition budget must be at least 1");
  const int d = target.d;
  grid_size_cap(d);
  const int K = choose_grid_size(d, r);
  const double root_d = std::sqrt(static_cast<double>(d));
  double clip_bound = target.sup_abs + 5.0 * root_d * target.omega(1.0);
  if (!(clip_bound > 0.0)) clip_bound = 1.0;
  const double omega_r = target.omega(std::pow(static_cast<double>(r), -1.0 / d));

  // Shrink the ramp bands until their total measure makes the clipped error
  // contribution on them at most omega_r in the L^p norm.
  double delta = 1.0 / (3.0 * K);
  if (omega_r > 0.0)
    delta = std::min(delta, std::pow(omega_r, p) /
                                (static_cast<double>(K) * d * std::pow(2.0 * clip_bound, p)));

  GapNet gap = build_gap_rcnet(target, r, delta);
  const FeedForwardNet clip = build_clip_net(clip_bound);
  MergedNet merged =
      merge_with_affines(gap.net.pre, gap.net.block, gap.net.reps, gap.net.post, clip,
                         1, AffineMap::identity(1), 1.0, 5 * d + 3, 69 * d + 48);
  check_table_margins(gap.table, gap.report.K, merged.cert, {1, 4});
  verify_cell_corners(merged.net, target, gap.table, gap.report.K, gap.report.shift);

  LpNet out;
  out.net = std::move(merged.net);
  out.gap = gap.report;
  out.p = p;
  out.clip_bound = clip_bound;
  out.bound_lp = gap.report.off_trifling_bound + omega_r;
  return out;
}

FeedForwardNet build_mid_net() {
  Mat W1 = Mat::Zero(6, 3);
  W1 << 1.0, -1.0, 0.0,   // |a - b| pair
      -1.0, 1.0, 0.0,     //
      1.0, 1.0, -2.0,     // (a + b - 2c) pair
      -1.0, -1.0, 2.0,    //
      1.0, 1.0, 0.0,      // (a + b) pair
      -1.0, -1.0, 0.0;
  Mat W2 = Mat::Zero(6, 6);
  W2 << 0.5, 0.5, 0.5, -0.5, 0.0, 0.0,    // |max(a,b) - c| pair
      -0.5, -0.5, -0.5, 0.5, 0.0, 0.0,    //
      -0.5, -0.5, 0.5, -0.5, 0.0, 0.0,    // |min(a,b) - c| pair
      0.5, 0.5, -0.5, 0.5, 0.0, 0.0,      //
      0.0, 0.0, 0.0, 0.0, 0.5, -0.5,      // (a + b)/2 pair
      0.0, 0.0, 0.0, 0.0, -0.5, 0.5;
  Mat W3(1, 6);
  // median = (a+b)/2 - |max(a,b)-c|/2 + |min(a,b)-c|/2
  W3 << -0.5, -0.5, 0.5, 0.5, 1.0, -1.0;
  FeedForwardNet net{{AffineMap{W1, Vec::Zero(6)}, AffineMap{W2, Vec::Zero(6)},
                      AffineMap{W3, Vec::Zero(1)}}};
  net.validate();
  return net;
}

LinfNet build_linf_rcnet(const TargetFunction& target, int r) {
  target.validate();
  if (target.d != 1)
    throw ValidationError("sup-norm construction is one-dimensional");
  if (r < 1) throw ValidationError("repetition budget must be at least 1");
  const int K = choose_grid_size(1, r);
  const double omega_r = target.omega(1.0 / r);

  double delta = 1.0 / (3.0 * K);
  for (int i = 0; i < 200 && target.omega(delta) > omega_r && delta > 1e-300; ++i)
    delta *= 0.5;

  GapNet gap = build_gap_rcnet(target, r, delta);
  const int D = gap.net.d_block();
  const int N = gap.net.width();

  AffineMap shift_minus = AffineMap::identity(1);
  shift_minus.b(0) = -delta;
  AffineMap shift_plus = AffineMap::identity(1);
  shift_plus.b(0) = delta;
  const AffineMap L1 = vstack(vstack(compose(gap.net.pre, shift_minus), gap.net.pre),
                              compose(gap.net.pre, shift_plus));
  const FeedForwardNet g1 =
      stack_parallel({gap.net.block, gap.net.block, gap.net.block});
  const AffineMap L2 =
      direct_sum(direct_sum(gap.net.post, gap.net.post), gap.net.post);
  const FeedForwardNet median = with_post(coord_embed({0}, 3), build_mid_net());
  const AffineMap L3 = coord_select({0}, 3);

  MergedNet merged = merge_with_affines(L1, g1, gap.net.reps, L2, median, 1, L3, 1.0,
                                        3 * D, 3 * N + 18 * D + 16);
  check_table_margins(gap.table, gap.report.K, merged.cert,
                      {1, 4, D + 1, D + 4, 2 * D + 1, 2 * D + 4});
  verify_cell_corners(merged.net, target, gap.table, gap.report.K, gap.report.shift);

  LinfNet out;
  out.net = std::move(merged.net);
  out.gap = gap.report;
  out.probe_offset = delta;
  out.bound_sup = gap.report.off_trifling_bound + target.omega(delta) + 1e-9;
  return out;
}

}  // namespace rcnet
