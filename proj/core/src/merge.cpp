#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rcnet/merge.hpp"

namespace rcnet {

namespace {

constexpr double kScaleTarget = 1048576.0;  // 2^20, common magnitude for scaled channels
constexpr double kMaxStageBound = 1e18;     // states beyond this cannot be phase-selected

double pow2_ceil(double x) {
  int e = 0;
  const double f = std::frexp(x, &e);
  return (f == 0.5) ? x : std::ldexp(1.0, e);
}

double pow2_floor(double x) {
  int e = 0;
  std::frexp(x, &e);
  return std::ldexp(1.0, e - 1);
}

std::vector<int> iota_idx(int n) {
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Depth-`depth` chain computing t -> t - 2, valid for t >= -shift.
FeedForwardNet build_countdown_chain(int depth, double shift) {
  FeedForwardNet net;
  Mat w(1, 1);
  w(0, 0) = 1.0;
  Vec b0(1);
  b0(0) = shift;
  net.layers.emplace_back(w, b0);
  for (int i = 0; i < depth - 1; ++i) net.layers.push_back(AffineMap::identity(1));
  Vec b1(1);
  b1(0) = -(shift + 2.0);
  net.layers.emplace_back(w, b1);
  return net;
}

// Places a d-dimensional block on the first d coordinates of R^D; the other
// output coordinates are held at zero.
FeedForwardNet embed_block(const FeedForwardNet& g, int D) {
  const auto idx = iota_idx(g.in_dim());
  return with_post(coord_embed(idx, D), with_pre(g, coord_select(idx, D)));
}

constexpr double kNoCap = std::numeric_limits<double>::infinity();

bool caps_declared(const Vec& cap) {
  for (Eigen::Index c = 0; c < cap.size(); ++c)
    if (std::isfinite(cap(c))) return true;
  return false;
}

void validate_cap_vector(const Vec& cap, int d, const char* which) {
  if (cap.size() == 0) return;
  if (cap.size() != d)
    throw ValidationError(std::string("merge_two_stages: ") + which +
                          " must be empty or match the state dimension");
  for (int c = 0; c < d; ++c)
    if (!(cap(c) > 0.0))
      throw ValidationError(std::string("merge_two_stages: ") + which +
                            " entries must be positive");
}

// Intersects the payload channels of B with the declared invariant box. A
// channel the interval pass tracks exactly (zero width) that still violates
// its cap proves the declaration false, which must fail loudly rather than
// silently narrow the box.
void clip_to_cap(IntervalBox& B, const Vec& cap) {
  if (cap.size() == 0) return;
  for (Eigen::Index c = 0; c < cap.size(); ++c) {
    if (!std::isfinite(cap(c))) continue;
    if (B.lo(c) == B.hi(c) && std::abs(B.lo(c)) > cap(c))
      throw NumericError(
          "merge_two_stages: an exactly tracked channel violates its declared "
          "state bound (channel " + std::to_string(c) + ", value " +
          std::to_string(B.lo(c)) + ", bound " + std::to_string(cap(c)) + ")");
    B.lo(c) = std::max(B.lo(c), -cap(c));
    B.hi(c) = std::min(B.hi(c), cap(c));
  }
}

}  // namespace

FeedForwardNet build_selector(int d, double M) {
  if (d < 1) throw ValidationError("build_selector: dimension must be >= 1");
  if (!(M > 0.0) || !std::isfinite(M)) {
    throw ValidationError("build_selector: M must be positive and finite");
  }
  const int in = 2 * d + 1;
  Mat W1 = Mat::Zero(2 * d + 2, in);
  Vec b1 = Vec::Zero(2 * d + 2);
  for (int i = 0; i < d; ++i) {
    W1(i, i) = 1.0;
    W1(i, 2 * d) = M;  // relu(u_i + M s)
    W1(d + i, d + i) = 1.0;
    W1(d + i, 2 * d) = -M;  // relu(v_i - M s)
  }
  W1(2 * d, 2 * d) = 1.0;       // relu(s)
  W1(2 * d + 1, 2 * d) = -1.0;  // relu(-s)

  Mat W2 = Mat::Zero(d + 1, 2 * d + 2);
  Vec b2 = Vec::Zero(d + 1);
  for (int i = 0; i < d; ++i) {
    W2(i, i) = 1.0;
    W2(i, d + i) = 1.0;
    W2(i, 2 * d) = -M;
    W2(i, 2 * d + 1) = -M;
  }
  W2(d, 2 * d) = 1.0;
  W2(d, 2 * d + 1) = -1.0;  // pass s through

  FeedForwardNet net;
  net.layers.emplace_back(std::move(W1), std::move(b1));
  net.layers.emplace_back(std::move(W2), std::move(b2));
  return net;
}

std::pair<FeedForwardNet, MergeCertificate> merge_two_stages(
    const FeedForwardNet& g1, int r1, const FeedForwardNet& g2, int r2,
    const IntervalBox& box0, const Vec& cap1, const Vec& cap2) {
  g1.validate();
  g2.validate();
  if (g1.in_dim() != g1.out_dim() || g2.in_dim() != g2.out_dim()) {
    throw ValidationError("merge_two_stages: both stages must map R^d to R^d");
  }
  if (g1.in_dim() != g2.in_dim()) {
    throw ValidationError("merge_two_stages: stages must share one state dimension");
  }
  if (r1 < 0) throw ValidationError("merge_two_stages: r1 must be >= 0");
  if (r2 < 1) throw ValidationError("merge_two_stages: r2 must be >= 1");
  const int d = g1.in_dim();
  if (box0.dim() != d) {
    throw ValidationError("merge_two_stages: certification box dimension mismatch");
  }
  validate_cap_vector(cap1, d, "cap1");
  validate_cap_vector(cap2, d, "cap2");
  for (Eigen::Index c = 0; c < cap1.size(); ++c) {
    if (std::isfinite(cap1(c)) &&
        std::max(std::abs(box0.lo(c)), std::abs(box0.hi(c))) > cap1(c))
      throw ValidationError(
          "merge_two_stages: declared stage-1 state bound does not cover the "
          "certification box on channel " + std::to_string(c));
  }
  const int steps = r1 + r2;

  // Pass 1: bound the whole trajectory (and both stage images at every step,
  // since the inactive stage is evaluated too) in natural units. States
  // entering each step are clipped to the declared per-stage invariants;
  // the hull keeps the raw one-step images, which the selector junction must
  // still accommodate.
  Vec hull(d);
  for (int c = 0; c < d; ++c) {
    hull(c) = std::max(std::abs(box0.lo(c)), std::abs(box0.hi(c)));
  }
  {
    IntervalBox B = box0;
    for (int k = 0; k < steps; ++k) {
      const NetBounds n1 = bound_net(g1, B);
      const NetBounds n2 = bound_net(g2, B);
      for (int c = 0; c < d; ++c) {
        hull(c) = std::max({hull(c), std::abs(n1.out.lo(c)), std::abs(n1.out.hi(c)),
                            std::abs(n2.out.lo(c)), std::abs(n2.out.hi(c))});
      }
      if (hull.maxCoeff() > kMaxStageBound) {
        throw NumericError(
            "merge_two_stages: stage trajectories exceed the mergeable range over the "
            "certification box");
      }
      B = (k < r1) ? n1.out : n2.out;
      clip_to_cap(B, (k < r1) ? cap1 : cap2);
    }
  }

  // Per-channel power-of-two scaling toward one common magnitude, and the
  // (power-of-two) selector constants.
  Vec Dv(d);
  for (int c = 0; c < d; ++c) {
    if (hull(c) < 1e-280) {
      Dv(c) = std::ldexp(1.0, 40);
    } else {
      Dv(c) = std::min(std::ldexp(1.0, 40),
                       std::max(std::ldexp(1.0, -40), pow2_floor(kScaleTarget / hull(c))));
    }
  }
  const double t_max = std::max(2.0 * r1 + 1.0, 2.0 * r2 - 1.0);
  const double Mt = pow2_ceil(t_max + 8.0);
  const double M =
      pow2_ceil(std::max({2.0 * kScaleTarget, 100.0 * (steps + 1), 2.0 * Mt}));

  // Assemble the fused block in scaled units, then fold the scaling into the
  // boundary affines (exact: all scales are powers of two).
  const int L = std::max({g1.depth(), g2.depth(), 1});
  const AffineMap Dmap = diag_map(Dv);
  const AffineMap Dinv = diag_map(Dv.cwiseInverse());
  const FeedForwardNet g1t = pad_depth(with_post(Dmap, with_pre(g1, Dinv)), L, M);
  const FeedForwardNet g2t = pad_depth(with_post(Dmap, with_pre(g2, Dinv)), L, M);
  const FeedForwardNet chain = build_countdown_chain(L, Mt);

  const AffineMap sel_payload = coord_select(iota_idx(d), d + 1);
  std::vector<int> t_idx{d};
  const AffineMap sel_t = coord_select(t_idx, d + 1);
  const FeedForwardNet G =
      stack_shared_input({with_pre(g1t, sel_payload), with_pre(g2t, sel_payload),
                          with_pre(chain, sel_t)});
  const FeedForwardNet psi = build_selector(d, M);
  FeedForwardNet Phi = compose_nets(psi, G);

  Vec Dbar(d + 1);
  Dbar.head(d) = Dv;
  Dbar(d) = 1.0;
  Phi = with_post(diag_map(Dbar.cwiseInverse()), with_pre(Phi, diag_map(Dbar)));

  const int target_width =
      std::max(Phi.width(), std::max(g1.width(), 1) + std::max(g2.width(), 1) + 2 * d);
  Phi = pad_width_to(Phi, target_width);

  // Pass 2: certify the fused block itself. The countdown must track the
  // exact integer schedule and every scaled payload must stay inside the
  // selector's validity range.
  MergeCertificate cert;
  cert.domain_box = box0;
  cert.bound_M = M;
  cert.merged_dims = d + 1;
  cert.merged_reps = steps;
  // One entry per fused-block channel: d scaled payload channels plus the
  // unscaled countdown channel.
  cert.state_scales = Vec(d + 1);
  cert.state_scales.head(d) = Dv;
  cert.state_scales(d) = 1.0;
  cert.t_shift = Mt;
  if (caps_declared(cap1) || caps_declared(cap2)) {
    cert.state_caps = Vec::Constant(d, kNoCap);
    for (int c = 0; c < d; ++c) {
      const double a = cap1.size() ? cap1(c) : kNoCap;
      const double b = cap2.size() ? cap2(c) : kNoCap;
      cert.state_caps(c) = std::max(a, b);
    }
  }
  const double t0 = 2.0 * r1 + 1.0;
  {
    IntervalBox B = IntervalBox::concat(box0, IntervalBox::point(Vec::Constant(1, t0)));
    double sup = 0.0;
    for (int c = 0; c < d; ++c) {
      sup = std::max(sup, std::max(std::abs(B.lo(c)), std::abs(B.hi(c))));
    }
    const bool dbg = std::getenv("RCNET_MERGE_DEBUG") != nullptr;
    for (int k = 0; k < steps; ++k) {
      if (dbg) {
        int cmax = 0;
        double worst = 0.0;
        for (int c = 0; c < d; ++c) {
          const double mag = std::max(std::abs(B.lo(c)), std::abs(B.hi(c)));
          if (Dv(c) * mag > worst) { worst = Dv(c) * mag; cmax = c; }
        }
        std::fprintf(stderr,
                     "[merge dbg] step %d: worst scaled %.6g (ch %d, Dv %.3g, "
                     "raw [%.6g, %.6g], width %.3g) M %.3g; t width %.3g\n",
                     k, worst, cmax, Dv(cmax), B.lo(cmax), B.hi(cmax),
                     B.hi(cmax) - B.lo(cmax), M, B.hi(d) - B.lo(d));
      }
      for (int c = 0; c < d; ++c) {
        const double mag = std::max(std::abs(B.lo(c)), std::abs(B.hi(c)));
        if (Dv(c) * mag > M) {
          throw NumericError("merge_two_stages: scaled state leaves the selector range");
        }
      }
      const NetBounds nb = bound_net(Phi, B);
      const double expected_t = t0 - 2.0 * (k + 1);
      if (std::abs(nb.out.lo(d) - expected_t) > 1e-6 ||
          std::abs(nb.out.hi(d) - expected_t) > 1e-6) {
        throw NumericError("merge_two_stages: countdown channel drifted at step " +
                           std::to_string(k));
      }
      for (int c = 0; c < d; ++c) {
        sup = std::max(sup, std::max(std::abs(nb.out.lo(c)), std::abs(nb.out.hi(c))));
      }
      B = nb.out;
      // Same per-period invariant clipping as pass 1 (cap vectors cover the
      // payload channels only; the countdown channel is checked exactly above).
      clip_to_cap(B, (k < r1) ? cap1 : cap2);
    }
    cert.state_sup = sup;
  }

  return {std::move(Phi), std::move(cert)};
}

std::pair<FeedForwardNet, MergeCertificate> merge_two_stages(
    const FeedForwardNet& g1, int r1, const FeedForwardNet& g2, int r2, double A) {
  if (!(A > 0.0)) throw ValidationError("merge_two_stages: A must be positive");
  return merge_two_stages(g1, r1, g2, r2, IntervalBox::cube(g1.in_dim(), A));
}

MergedNet merge_with_affines(const AffineMap& L1, const FeedForwardNet& g1, int r1,
                             const AffineMap& L2, const FeedForwardNet& g2, int r2,
                             const AffineMap& L3, double A, int dhat, int target_width,
                             const Vec& cap1, const Vec& cap2) {
  L1.validate();
  L2.validate();
  L3.validate();
  g1.validate();
  g2.validate();
  const int d0 = L1.in_dim();
  const int d1 = g1.in_dim();
  const int d2 = g2.in_dim();
  if (g1.out_dim() != d1 || g2.out_dim() != d2) {
    throw ValidationError("merge_with_affines: stages must map R^d to R^d");
  }
  if (L1.out_dim() != d1 || L2.in_dim() != d1 || L2.out_dim() != d2 || L3.in_dim() != d2) {
    throw ValidationError("merge_with_affines: interface affine dimensions do not chain");
  }
  if (r1 < 0) throw ValidationError("merge_with_affines: r1 must be >= 0");
  if (r2 < 1) throw ValidationError("merge_with_affines: r2 must be >= 1");
  if (!(A > 0.0)) throw ValidationError("merge_with_affines: A must be positive");
  if (dhat < 0) dhat = std::max(d1, d2);
  if (dhat < std::max(d1, d2)) {
    throw ValidationError("merge_with_affines: dhat must be >= max(d1, d2)");
  }

  // Stage 1 and the interface map L2, both living on R^dhat. L2 is realized
  // as a one-shot stage relu(L2 u) - relu(-L2 u), exact for every u.
  const FeedForwardNet ghat1 = embed_block(g1, dhat);
  FeedForwardNet ghatm;
  {
    const AffineMap l2sel = compose(L2, coord_select(iota_idx(d1), dhat));
    Mat Wn = -l2sel.W;
    Vec bn = -l2sel.b;
    AffineMap first = vstack(l2sel, AffineMap(std::move(Wn), std::move(bn)));
    Mat Wo = Mat::Zero(dhat, 2 * d2);
    for (int j = 0; j < d2; ++j) {
      Wo(j, j) = 1.0;
      Wo(j, d2 + j) = -1.0;
    }
    ghatm.layers.push_back(std::move(first));
    ghatm.layers.emplace_back(std::move(Wo), Vec::Zero(dhat));
  }

  const AffineMap A_embed = compose(coord_embed(iota_idx(d1), dhat), L1);
  const IntervalBox B0 = bound_affine(A_embed, IntervalBox::cube(d0, A));

  auto [G1, cert1] = merge_two_stages(ghat1, r1, ghatm, 1, B0);
  (void)cert1;

  const FeedForwardNet ghat2 = embed_block(g2, dhat + 1);
  const double t_inner0 = 2.0 * r1 + 1.0;
  const IntervalBox B0_l2 =
      IntervalBox::concat(B0, IntervalBox::point(Vec::Constant(1, t_inner0)));
  auto [Phi, cert2] = merge_two_stages(G1, r1 + 1, ghat2, r2, B0_l2);

  // pre(x) = (embedded L1(x), 0 padding, t_inner0, t_outer0).
  Mat Wp = Mat::Zero(dhat + 2, d0);
  Vec bp = Vec::Zero(dhat + 2);
  Wp.topRows(dhat) = A_embed.W;
  bp.head(dhat) = A_embed.b;
  bp(dhat) = t_inner0;
  bp(dhat + 1) = 2.0 * (r1 + 1) + 1.0;

  const AffineMap post = compose(L3, coord_select(iota_idx(d2), dhat + 2));

  const int natural_width = Phi.width();
  if (target_width < 0) {
    target_width = std::max(g1.width(), 1) + std::max(g2.width(), 1) + 6 * dhat + 2;
  }
  if (natural_width > target_width) {
    throw NumericError("merge_with_affines: natural width " + std::to_string(natural_width) +
                       " exceeds target width " + std::to_string(target_width));
  }

  MergedNet out;
  out.net.pre = AffineMap(std::move(Wp), std::move(bp));
  out.net.block = pad_width_to(Phi, target_width);
  out.net.reps = r1 + r2 + 1;
  out.net.post = post;
  out.net.validate();
  out.cert = cert2;
  out.cert.domain_box = IntervalBox::cube(d0, A);
  return out;
}

Vec sequential_pipeline_oracle(const AffineMap& L1, const FeedForwardNet& g1, int r1,
                               const AffineMap& L2, const FeedForwardNet& g2, int r2,
                               const AffineMap& L3, const Vec& x) {
  Vec z = eval_affine(L1, x);
  for (int s = 0; s < r1; ++s) z = eval_net(g1, z);
  z = eval_affine(L2, z);
  for (int s = 0; s < r2; ++s) z = eval_net(g2, z);
  return eval_affine(L3, z);
}

}  // namespace rcnet
