#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rcnet/errors.hpp"
#include "rcnet/merge.hpp"
#include "rcnet/rng.hpp"
#include "test_helpers.hpp"

using namespace rcnet;
using rcnet_test::random_affine;
using rcnet_test::random_net;
using rcnet_test::random_vec;

TEST_CASE("selector picks the branch by the sign of the phase channel") {
  const int d = 2;
  const double M = 8.0;
  const FeedForwardNet sel = build_selector(d, M);
  CHECK(sel.in_dim() == 2 * d + 1);
  CHECK(sel.out_dim() == d + 1);
  CHECK(sel.depth() == 1);
  CHECK(sel.width() == 2 * d + 2);

  Vec in(5);
  in << 0.5, -1.0, 2.0, 3.0, 1.0;  // (u, v, s = 1)
  Vec out = eval_net(sel, in);
  CHECK(out(0) == 0.5);
  CHECK(out(1) == -1.0);
  CHECK(out(2) == 1.0);  // phase channel passes through

  in(4) = -1.0;
  out = eval_net(sel, in);
  CHECK(out(0) == 2.0);
  CHECK(out(1) == 3.0);
  CHECK(out(2) == -1.0);

  in(4) = -3.0;
  out = eval_net(sel, in);
  CHECK(out(0) == 2.0);
  CHECK(out(1) == 3.0);
}

TEST_CASE("merge_two_stages fuses two repeated blocks") {
  Rng rng(61);
  for (int trial = 0; trial < 12; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const int w1 = d + 1 + static_cast<int>(rng.below(3));
    const int w2 = d + 1 + static_cast<int>(rng.below(3));
    const FeedForwardNet g1 =
        random_net(d, d, 1 + static_cast<int>(rng.below(2)), w1, rng, 1.1);
    const FeedForwardNet g2 =
        random_net(d, d, 1 + static_cast<int>(rng.below(2)), w2, rng, 1.1);
    const int r1 = static_cast<int>(rng.below(3));
    const int r2 = 1 + static_cast<int>(rng.below(2));

    const auto [phi, cert] = merge_two_stages(g1, r1, g2, r2, 1.0);
    CHECK(phi.in_dim() == d + 1);
    CHECK(phi.width() == g1.width() + g2.width() + 2 * d);
    CHECK(phi.depth() == std::max(g1.depth(), g2.depth()) + 1);
    CHECK(cert.merged_dims == d + 1);
    CHECK(cert.merged_reps == r1 + r2);
    CHECK(cert.bound_M > 0.0);

    for (int k = 0; k < 25; ++k) {
      const Vec x = random_vec(d, 1.0, rng);
      Vec direct = x;
      for (int s = 0; s < r1; ++s) direct = eval_net(g1, direct);
      for (int s = 0; s < r2; ++s) direct = eval_net(g2, direct);

      Vec state(d + 1);
      state << x, 2.0 * r1 + 1.0;
      for (int s = 0; s < r1 + r2; ++s) state = eval_net(phi, state);
      CHECK((state.head(d) - direct).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(state(d) - (1.0 - 2.0 * r2)) <= 1e-10);
    }
  }
}

TEST_CASE("merge_two_stages requires at least one second-stage repetition") {
  Rng rng(62);
  const FeedForwardNet g = random_net(2, 2, 1, 3, rng);
  CHECK_THROWS_AS(merge_two_stages(g, 1, g, 0, 1.0), ValidationError);
  CHECK_THROWS_AS(merge_two_stages(g, -1, g, 1, 1.0), ValidationError);
}

TEST_CASE("merge_with_affines matches the sequential pipeline") {
  Rng rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    const int d0 = 1 + static_cast<int>(rng.below(3));
    const int d1 = 1 + static_cast<int>(rng.below(3));
    const int d2 = 1 + static_cast<int>(rng.below(3));
    const int d3 = 1 + static_cast<int>(rng.below(3));
    const AffineMap L1 = random_affine(d1, d0, 0.8, rng);
    const AffineMap L2 = random_affine(d2, d1, 0.8, rng);
    const AffineMap L3 = random_affine(d3, d2, 0.8, rng);
    const FeedForwardNet g1 =
        random_net(d1, d1, 1 + static_cast<int>(rng.below(2)), d1 + 2, rng, 1.1);
    const FeedForwardNet g2 =
        random_net(d2, d2, 1 + static_cast<int>(rng.below(2)), d2 + 2, rng, 1.1);
    const int r1 = static_cast<int>(rng.below(3));
    const int r2 = 1 + static_cast<int>(rng.below(2));

    const MergedNet merged = merge_with_affines(L1, g1, r1, L2, g2, r2, L3, 1.0);
    const int dhat = std::max(d1, d2);
    CHECK(merged.net.d_in() == d0);
    CHECK(merged.net.d_out() == d3);
    CHECK(merged.net.d_block() == dhat + 2);
    CHECK(merged.net.reps == r1 + r2 + 1);
    CHECK(merged.net.width() == g1.width() + g2.width() + 6 * dhat + 2);
    CHECK(merged.net.depth() == std::max(g1.depth() + 2, g2.depth() + 1));

    for (int k = 0; k < 50; ++k) {
      const Vec x = random_vec(d0, 1.0, rng);
      const Vec want = sequential_pipeline_oracle(L1, g1, r1, L2, g2, r2, L3, x);
      const Vec got = eval_rcnet(merged.net, x);
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("merge_with_affines honors an explicit embedding dimension") {
  Rng rng(64);
  const AffineMap L1 = random_affine(2, 1, 1.0, rng);
  const AffineMap L2 = random_affine(2, 2, 1.0, rng);
  const AffineMap L3 = random_affine(1, 2, 1.0, rng);
  const FeedForwardNet g1 = random_net(2, 2, 1, 4, rng, 1.0);
  const FeedForwardNet g2 = random_net(2, 2, 1, 4, rng, 1.0);

  const MergedNet wide = merge_with_affines(L1, g1, 1, L2, g2, 1, L3, 1.0, 5);
  CHECK(wide.net.d_block() == 7);
  const Vec x = random_vec(1, 1.0, rng);
  const Vec want = sequential_pipeline_oracle(L1, g1, 1, L2, g2, 1, L3, x);
  CHECK((eval_rcnet(wide.net, x) - want).cwiseAbs().maxCoeff() <= 1e-8);

  // Padding up is allowed, squeezing below the natural width is not.
  const MergedNet padded =
      merge_with_affines(L1, g1, 1, L2, g2, 1, L3, 1.0, -1, 64);
  CHECK(padded.net.width() == 64);
  CHECK((eval_rcnet(padded.net, x) - want).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_THROWS_AS(merge_with_affines(L1, g1, 1, L2, g2, 1, L3, 1.0, -1, 10),
                  NumericError);
}

TEST_CASE("merged certificate reports the certification domain") {
  Rng rng(65);
  const AffineMap L1 = random_affine(2, 2, 0.7, rng);
  const AffineMap L2 = random_affine(2, 2, 0.7, rng);
  const AffineMap L3 = random_affine(1, 2, 0.7, rng);
  const FeedForwardNet g1 = random_net(2, 2, 1, 3, rng, 1.0);
  const FeedForwardNet g2 = random_net(2, 2, 1, 3, rng, 1.0);
  const MergedNet merged = merge_with_affines(L1, g1, 2, L2, g2, 1, L3, 2.0);
  CHECK(merged.cert.domain_box.dim() == 2);
  CHECK(merged.cert.domain_box.max_abs() == 2.0);
  CHECK(merged.cert.state_sup > 0.0);
  CHECK(merged.cert.state_scales.size() == merged.net.d_block());
  // The selector constant is a power of two.
  const double m_log = std::log2(merged.cert.bound_M);
  CHECK(m_log == std::floor(m_log));
}
