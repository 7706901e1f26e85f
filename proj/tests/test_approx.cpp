#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcnet/approximator.hpp"
#include "rcnet/errors.hpp"
#include "rcnet/rng.hpp"
#include "rcnet/target.hpp"

using namespace rcnet;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double median3(double a, double b, double c) {
  std::vector<double> t = {a, b, c};
  std::sort(t.begin(), t.end());
  return t[1];
}

}  // namespace

TEST_CASE("cube partition basics") {
  CubePartition part;
  part.d = 1;
  part.K = 3;
  part.delta = 0.1;
  part.validate();
  CHECK(part.num_cells() == 3);
  CHECK(part.cell_of(v1(0.2))[0] == 0);
  CHECK(part.cell_of(v1(0.99))[0] == 2);
  CHECK(part.cell_of(v1(1.0))[0] == 2);  // clamped at the top face

  // Ramp bands sit at the top of each cell except the last: with K = 3 and
  // delta = 0.1 the band for cell 0 is (1/3 - 0.1, 1/3) in input units.
  CHECK_FALSE(part.in_trifling(v1(0.2)));
  CHECK(part.in_trifling(v1(1.0 / 3.0 - 0.05)));
  CHECK_FALSE(part.in_trifling(v1(1.0 / 3.0 + 0.01)));
  CHECK_FALSE(part.in_trifling(v1(0.99)));

  CubePartition bad = part;
  bad.delta = 0.5;  // wider than a cell
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("grid size selection respects the dimension caps") {
  CHECK(grid_size_cap(1) == 27);
  CHECK(grid_size_cap(2) == 4);
  CHECK(grid_size_cap(3) == 2);
  CHECK_THROWS_AS(grid_size_cap(4), ValidationError);

  CHECK(choose_grid_size(1, 4) == 4);
  CHECK(choose_grid_size(1, 27) == 27);
  CHECK(choose_grid_size(1, 64) == 27);
  CHECK(choose_grid_size(2, 16) == 4);
  CHECK(choose_grid_size(2, 15) == 3);
  CHECK(choose_grid_size(3, 8) == 2);
  CHECK(choose_grid_size(1, 1) == 1);
  CHECK_THROWS_AS(choose_grid_size(1, 0), ValidationError);
}

TEST_CASE("cell enumeration index walks the base-K grid") {
  // d = 2, K = 3: index = beta_1 + 2*3*beta_0, strictly increasing in
  // lexicographic order, with a gap of K+1 at every carry.
  CHECK(cell_enumeration_index({0, 0}, 2, 3) == 0);
  CHECK(cell_enumeration_index({0, 1}, 2, 3) == 1);
  CHECK(cell_enumeration_index({0, 2}, 2, 3) == 2);
  CHECK(cell_enumeration_index({1, 0}, 2, 3) == 6);
  CHECK(cell_enumeration_index({2, 2}, 2, 3) == 14);

  std::int64_t prev = -1;
  for (int b0 = 0; b0 < 3; ++b0) {
    for (int b1 = 0; b1 < 3; ++b1) {
      const std::int64_t j = cell_enumeration_index({b0, b1}, 2, 3);
      CHECK(j > prev);
      if (prev >= 0) {
        const std::int64_t gap = j - prev;
        CHECK((gap == 1 || gap == 4));  // 1 inside a row, K+1 on a carry
      }
      prev = j;
    }
  }
  CHECK(prev == 2 * 9 - 3 - 1);  // jmax = 2 K^d - K - 1

  CHECK_THROWS_AS(cell_enumeration_index({3, 0}, 2, 3), ValidationError);
}

TEST_CASE("value table nodes are exact and the guard tail oscillates") {
  const TargetFunction target = make_abs1_target(1);
  const int K = 3;
  const double shift = target.omega(1.0);
  const PLTable table = build_pl_table(target, K, shift);
  CHECK(table.n == 2 * K);
  CHECK(static_cast<int>(table.values.size()) == table.n);
  CHECK(table.eps_step > 0.0);

  // Node s = 2j holds f(cell j) - f0 + shift (for d = 1, cell centers are
  // corners j/K).
  REQUIRE(table.node_s.size() == table.node_value.size());
  CHECK(table.node_s.front() == 0);
  for (std::size_t i = 0; i < table.node_s.size(); ++i) {
    const auto s = static_cast<std::size_t>(table.node_s[i]);
    CHECK(table.values[s] == table.node_value[i]);
  }

  // Used samples step by at most eps_step.
  const std::int64_t jmax = 2 * K - K - 1;
  for (std::int64_t s = 1; s <= jmax; ++s) {
    CHECK(std::abs(table.values[static_cast<std::size_t>(s)] -
                   table.values[static_cast<std::size_t>(s - 1)]) <=
          table.eps_step * (1.0 + 1e-12));
  }
  // Guard tail: quantized alternating oscillation, still stepping by at most
  // one quantum.
  for (std::int64_t s = jmax + 1; s < table.n; ++s) {
    const double diff = table.values[static_cast<std::size_t>(s)] -
                        table.values[static_cast<std::size_t>(s - 1)];
    CHECK(std::abs(diff) <= table.eps_step * (1.0 + 1e-12));
    if (s > jmax + 1) CHECK(std::abs(diff) > 0.0);
  }
  for (const double v : table.values) CHECK(v >= 0.0);
}

TEST_CASE("value table of a constant target is flat") {
  const TargetFunction target = make_const_target(1, 1.5);
  const PLTable table = build_pl_table(target, 2, 0.0);
  CHECK(table.eps_step == 0.0);
  for (const double v : table.values) CHECK(v == table.values.front());
}

TEST_CASE("stage one maps cell interiors to enumeration indices") {
  const int K = 3;
  const double delta = 1.0 / (3.0 * K);
  SUBCASE("one dimension") {
    const RCNet phi1 = build_phi1(1, K, 4, delta);
    CHECK(phi1.d_block() == 5);
    CHECK(phi1.reps == 3);
    for (int cell = 0; cell < K; ++cell) {
      const double x = (cell + 0.4) / K;
      const double j = eval_rcnet_scalar(phi1, v1(x));
      CHECK(std::abs(j - cell_enumeration_index({cell}, 1, K)) <= 1e-10);
    }
  }
  SUBCASE("two dimensions") {
    const RCNet phi1 = build_phi1(2, K, 16, delta);
    CHECK(phi1.d_block() == 10);
    for (int b0 = 0; b0 < K; ++b0) {
      for (int b1 = 0; b1 < K; ++b1) {
        const double x = (b0 + 0.3) / K;
        const double y = (b1 + 0.6) / K;
        const double j = eval_rcnet_scalar(phi1, v2(x, y));
        CHECK(std::abs(j - cell_enumeration_index({b0, b1}, 2, K)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("gap net approximates off the ramp bands") {
  const TargetFunction target = make_abs1_target(1);
  const int r = 4;
  const GapNet gap = build_gap_rcnet(target, r);
  const int d = 1;
  CHECK(gap.net.width() == 39 * d + 24);
  CHECK(gap.net.depth() == 3);
  CHECK(gap.net.d_block() == 5 * d + 3);
  CHECK(gap.net.reps == 3 * r - 1);
  CHECK(gap.report.K == choose_grid_size(1, r));
  CHECK(gap.report.off_trifling_bound > 0.0);

  CubePartition part;
  part.d = 1;
  part.K = gap.report.K;
  part.delta = gap.report.delta;
  double worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = i / 400.0;
    if (part.in_trifling(v1(x))) continue;
    worst = std::max(worst,
                     std::abs(eval_rcnet_scalar(gap.net, v1(x)) - target.f(v1(x))));
  }
  CHECK(worst <= gap.report.off_trifling_bound);
}

TEST_CASE("gap net validation") {
  const TargetFunction target = make_abs1_target(1);
  CHECK_THROWS_AS(build_gap_rcnet(target, 0), ValidationError);
  // delta must respect the ramp-width cap 1/(3K).
  CHECK_THROWS_AS(build_gap_rcnet(target, 4, 0.2), ValidationError);
  TargetFunction highd = make_abs1_target(4);
  CHECK_THROWS_AS(build_gap_rcnet(highd, 16), ValidationError);
}

TEST_CASE("clip net clamps to the bound") {
  const FeedForwardNet clip = build_clip_net(2.0);
  CHECK(clip.width() == 4);
  CHECK(clip.depth() == 2);
  Rng rng(81);
  for (int k = 0; k < 200; ++k) {
    const double x = rng.uniform(-6.0, 6.0);
    const double want = std::min(2.0, std::max(-2.0, x));
    // The pass-through path runs x through additive shifts (x+b, x+3b), so
    // generic inputs agree with the clamp only to a few ulp of those
    // intermediates.
    CHECK(std::abs(eval_net(clip, v1(x))(0) - want) <= 1e-14);
  }
  // Dyadic inputs round nowhere and come back exactly.
  for (const double x : {0.0, 0.5, -1.25, 2.0, -2.0, 4.0, -6.0}) {
    const double want = std::min(2.0, std::max(-2.0, x));
    CHECK(eval_net(clip, v1(x))(0) == want);
  }
  CHECK_THROWS_AS(build_clip_net(0.0), ValidationError);
}

TEST_CASE("lp net shape and pointwise sanity") {
  const TargetFunction target = make_abs1_target(1);
  const int r = 8;
  const LpNet lp = build_lp_rcnet(target, r, 2.0);
  const int d = 1;
  CHECK(lp.net.width() == 69 * d + 48);
  CHECK(lp.net.depth() == 5);
  CHECK(lp.net.d_block() == 5 * d + 5);
  CHECK(lp.net.reps == 3 * r + 1);
  CHECK(lp.bound_lp > 0.0);
  CHECK(lp.clip_bound > 0.0);

  // Outputs are clamped, and most sampled points sit within the off-band sup
  // bound of the target.
  Rng rng(82);
  for (int k = 0; k < 100; ++k) {
    const double x = rng.uniform01();
    const double y = eval_rcnet_scalar(lp.net, v1(x));
    CHECK(std::abs(y) <= lp.clip_bound + 1e-9);
  }
  CHECK_THROWS_AS(build_lp_rcnet(target, r, 0.5), ValidationError);
}

TEST_CASE("median net equals the sorting oracle") {
  const FeedForwardNet mid = build_mid_net();
  CHECK(mid.in_dim() == 3);
  CHECK(mid.out_dim() == 1);
  CHECK(mid.width() == 6);
  CHECK(mid.depth() == 2);

  CHECK(eval_net(mid, Vec(v1(3.0).replicate(3, 1)))(0) == 3.0);
  Vec t(3);
  t << 3.0, 1.0, 2.0;
  CHECK(eval_net(mid, t)(0) == 2.0);
  t << 5.0, 5.0, 1.0;
  CHECK(eval_net(mid, t)(0) == 5.0);
  t << -1.0, -2.0, -3.0;
  CHECK(eval_net(mid, t)(0) == -2.0);

  Rng rng(83);
  for (int k = 0; k < 2000; ++k) {
    t << rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0);
    const double want = median3(t(0), t(1), t(2));
    CHECK(std::abs(eval_net(mid, t)(0) - want) <= 1e-12);
  }
}

TEST_CASE("sup-norm net bounds the error everywhere") {
  const TargetFunction target = make_abs1_target(1);
  const int r = 4;
  const LinfNet li = build_linf_rcnet(target, r);
  CHECK(li.net.depth() == 5);
  CHECK(li.net.d_block() == 26);
  CHECK(li.net.reps == 3 * r + 1);
  CHECK(li.probe_offset > 0.0);
  CHECK(li.bound_sup > 0.0);

  double worst = 0.0;
  for (int i = 0; i <= 800; ++i) {
    const double x = i / 800.0;
    worst = std::max(worst,
                     std::abs(eval_rcnet_scalar(li.net, v1(x)) - target.f(v1(x))));
  }
  CHECK(worst <= li.bound_sup);

  const TargetFunction twod = make_abs1_target(2);
  CHECK_THROWS_AS(build_linf_rcnet(twod, 4), ValidationError);
}
