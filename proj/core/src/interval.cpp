#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rcnet/interval.hpp"

namespace rcnet {

namespace {

constexpr double kHugeBound = 1e100;

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// Interval of sum_j w_j * [blo_j, bhi_j] + c.
Interval interval_dot(const Eigen::RowVectorXd& w, const Vec& blo, const Vec& bhi,
                      double c) {
  double lo = c, hi = c;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double wj = w(j);
    if (wj == 0.0) continue;
    if (wj > 0.0) {
      lo += wj * blo(j);
      hi += wj * bhi(j);
    } else {
      lo += wj * bhi(j);
      hi += wj * blo(j);
    }
  }
  return {lo, hi};
}

double row_magnitude(const Eigen::RowVectorXd& w, const Vec& blo, const Vec& bhi,
                     double c) {
  double m = std::abs(c);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) == 0.0) continue;
    m += std::abs(w(j)) * std::max(std::abs(blo(j)), std::abs(bhi(j)));
  }
  return m;
}

int row_nnz(const Eigen::RowVectorXd& w) {
  int n = 0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) ++n;
  }
  return n;
}

// s = a + b with *exact_flag cleared when the sum rounded (2Sum residual).
inline double add_checked(double a, double b, bool* exact_flag) {
  const double s = a + b;
  const double bp = s - a;
  const double err = (a - (s - bp)) + (b - bp);
  if (err != 0.0) *exact_flag = false;
  return s;
}

// True when w . x + c evaluates with zero floating-point rounding on the
// point input x, under both summation associations the evaluation paths use
// (products in column order with the bias folded in first or last). Exact
// sums are association-independent, so the certified value matches whatever
// order the dense kernels pick. Writes the value to *out on success.
bool exact_point_row(const Eigen::RowVectorXd& w, const Vec& x, double c, double* out) {
  bool exact = true;
  double acc_last = 0.0;  // bias-last association
  double acc_first = c;   // bias-first association
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double wj = w(j);
    if (wj == 0.0) continue;
    const double p = wj * x(j);
    if (!std::isfinite(p) || std::fma(wj, x(j), -p) != 0.0) return false;
    acc_last = add_checked(acc_last, p, &exact);
    acc_first = add_checked(acc_first, p, &exact);
    if (!exact) return false;
  }
  acc_last = add_checked(acc_last, c, &exact);
  if (!exact || acc_last != acc_first) return false;
  *out = acc_last;
  return true;
}

}  // namespace

IntervalBox::IntervalBox(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  validate();
}

void IntervalBox::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw ValidationError("IntervalBox: lo and hi must be non-empty and equal-sized");
  }
  if (!lo.allFinite() || !hi.allFinite()) {
    throw ValidationError("IntervalBox: bounds must be finite");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo(i) > hi(i)) {
      throw ValidationError("IntervalBox: lo exceeds hi at coordinate " + std::to_string(i));
    }
  }
}

double IntervalBox::max_abs() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    m = std::max(m, std::max(std::abs(lo(i)), std::abs(hi(i))));
  }
  return m;
}

IntervalBox IntervalBox::cube(int d, double half_width) {
  if (d < 1) throw ValidationError("IntervalBox::cube: dimension must be >= 1");
  if (!(half_width >= 0.0)) throw ValidationError("IntervalBox::cube: half width must be >= 0");
  return IntervalBox(Vec::Constant(d, -half_width), Vec::Constant(d, half_width));
}

IntervalBox IntervalBox::point(const Vec& x) { return IntervalBox(x, x); }

IntervalBox IntervalBox::concat(const IntervalBox& a, const IntervalBox& b) {
  Vec lo(a.dim() + b.dim());
  Vec hi(a.dim() + b.dim());
  lo << a.lo, b.lo;
  hi << a.hi, b.hi;
  return IntervalBox(std::move(lo), std::move(hi));
}

IntervalBox bound_affine(const AffineMap& a, const IntervalBox& box) {
  if (box.dim() != a.in_dim()) {
    throw ValidationError("bound_affine: box dimension does not match map input");
  }
  Vec lo(a.out_dim()), hi(a.out_dim());
  for (int o = 0; o < a.out_dim(); ++o) {
    const Eigen::RowVectorXd w = a.W.row(o);
    const Interval z = interval_dot(w, box.lo, box.hi, a.b(o));
    const double mag = row_magnitude(w, box.lo, box.hi, a.b(o));
    const double eps = mag * (64.0 + 4.0 * row_nnz(w)) * 0x1.0p-52 + 1e-300;
    lo(o) = z.lo - eps;
    hi(o) = z.hi + eps;
  }
  return IntervalBox(std::move(lo), std::move(hi));
}

NetBounds bound_net(const FeedForwardNet& net, const IntervalBox& box) {
  net.validate();
  if (box.dim() != net.in_dim()) {
    throw ValidationError("bound_net: box dimension does not match net input");
  }

  NetBounds nb;
  // Box feeding the current affine layer (post-relu of previous layer).
  Vec cur_lo = box.lo, cur_hi = box.hi;
  // Data for the refinement step: previous affine layer, the box that fed it,
  // and the per-row fp slack it was widened by.
  const AffineMap* prev = nullptr;
  Vec feed_lo, feed_hi, prev_eps;

  const int L = net.depth();
  for (int l = 0; l <= L; ++l) {
    const AffineMap& A = net.layers[static_cast<size_t>(l)];
    const int rows = A.out_dim();
    Vec z_lo(rows), z_hi(rows), eps_vec(rows);

    for (int o = 0; o < rows; ++o) {
      const Eigen::RowVectorXd w = A.W.row(o);
      const double c = A.b(o);

      // Fast path: a row that reads only point-valued channels and whose
      // arithmetic provably never rounds (integer schedules combined with
      // power-of-two scales: countdown chains, selector junctions) is itself
      // an exact point and carries no fp slack. Without this, phantom slack
      // on countdown channels gets amplified by selector constants when
      // already-merged blocks are merged again.
      bool point_inputs = true;
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w(j) != 0.0 && cur_lo(j) != cur_hi(j)) {
          point_inputs = false;
          break;
        }
      }
      if (point_inputs) {
        double v = 0.0;
        if (exact_point_row(w, cur_lo, c, &v)) {
          z_lo(o) = v;
          z_hi(o) = v;
          eps_vec(o) = 0.0;
          nb.max_abs_preact = std::max(nb.max_abs_preact, std::abs(v));
          continue;
        }
      }

      const Interval naive = interval_dot(w, cur_lo, cur_hi, c);
      double lo = naive.lo, hi = naive.hi;

      if (prev != nullptr) {
        // Greedy pairwise-cancellation refinement. Columns with exactly
        // opposite coefficients are matched; each match is bounded through
        // the difference of the producing rows and the better of the two
        // available partners is kept.
        std::vector<int> nz;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
          if (w(j) != 0.0) nz.push_back(static_cast<int>(j));
        }
        std::vector<bool> matched(nz.size(), false);
        bool any_pair = false;
        double r_lo = c, r_hi = c;
        for (size_t ii = 0; ii < nz.size(); ++ii) {
          if (matched[ii]) continue;
          const int i = nz[ii];
          int best = -1;
          double best_width = std::numeric_limits<double>::infinity();
          Interval best_delta{};
          for (size_t jj = ii + 1; jj < nz.size(); ++jj) {
            if (matched[jj]) continue;
            const int j = nz[jj];
            if (w(i) != -w(j)) continue;
            const Eigen::RowVectorXd dw = prev->W.row(i) - prev->W.row(j);
            const double db = prev->b(i) - prev->b(j);
            const Interval delta = interval_dot(dw, feed_lo, feed_hi, db);
            const double width = delta.hi - delta.lo;
            if (width < best_width) {
              best_width = width;
              best = static_cast<int>(jj);
              best_delta = delta;
            }
          }
          if (best < 0) continue;
          matched[ii] = true;
          matched[static_cast<size_t>(best)] = true;
          any_pair = true;
          const int j = nz[static_cast<size_t>(best)];
          // relu(z_i) - relu(z_j) lies in [min(delta.lo, 0), max(delta.hi, 0)]
          // when z_i - z_j ranges over delta; intersect with the naive pair
          // bound for safety on loose deltas.
          double d_lo = std::min(best_delta.lo, 0.0);
          double d_hi = std::max(best_delta.hi, 0.0);
          const double si_lo = std::max(cur_lo(i), 0.0), si_hi = std::max(cur_hi(i), 0.0);
          const double sj_lo = std::max(cur_lo(j), 0.0), sj_hi = std::max(cur_hi(j), 0.0);
          d_lo = std::max(d_lo, si_lo - sj_hi);
          d_hi = std::min(d_hi, si_hi - sj_lo);
          // Residual fp error of the two unit evaluations feeding the pair.
          const double pair_slack = prev_eps(i) + prev_eps(j);
          const double alpha = w(i);
          double p_lo = alpha >= 0.0 ? alpha * d_lo : alpha * d_hi;
          double p_hi = alpha >= 0.0 ? alpha * d_hi : alpha * d_lo;
          p_lo -= std::abs(alpha) * pair_slack;
          p_hi += std::abs(alpha) * pair_slack;
          r_lo += p_lo;
          r_hi += p_hi;
        }
        if (any_pair) {
          for (size_t ii = 0; ii < nz.size(); ++ii) {
            if (matched[ii]) continue;
            const int j = nz[ii];
            const double wj = w(j);
            const double s_lo = std::max(cur_lo(j), 0.0), s_hi = std::max(cur_hi(j), 0.0);
            if (wj > 0.0) {
              r_lo += wj * s_lo;
              r_hi += wj * s_hi;
            } else {
              r_lo += wj * s_hi;
              r_hi += wj * s_lo;
            }
          }
          // Both brackets are sound, so their intersection is too; guard
          // against an empty intersection caused by slack asymmetries.
          const double i_lo = std::max(lo, r_lo);
          const double i_hi = std::min(hi, r_hi);
          if (i_lo <= i_hi) {
            lo = i_lo;
            hi = i_hi;
          }
        }
      }

      const double mag = row_magnitude(w, cur_lo, cur_hi, c);
      const double eps = mag * (64.0 + 4.0 * row_nnz(w)) * 0x1.0p-52 + 1e-300;
      eps_vec(o) = eps;
      lo -= eps;
      hi += eps;
      if (!std::isfinite(lo) || !std::isfinite(hi) || std::abs(lo) > kHugeBound ||
          std::abs(hi) > kHugeBound) {
        throw NumericError("bound_net: interval bounds overflow at layer " + std::to_string(l));
      }
      z_lo(o) = lo;
      z_hi(o) = hi;
      nb.max_abs_preact = std::max(nb.max_abs_preact, std::max(std::abs(lo), std::abs(hi)));
    }

    if (l < L) {
      feed_lo = cur_lo;
      feed_hi = cur_hi;
      prev = &A;
      prev_eps = eps_vec;
      cur_lo = z_lo.cwiseMax(0.0);
      cur_hi = z_hi.cwiseMax(0.0);
    } else {
      nb.out = IntervalBox(z_lo, z_hi);
    }
  }
  return nb;
}

double interval_bound(const FeedForwardNet& net, const IntervalBox& input_box) {
  return bound_net(net, input_box).max_abs_preact;
}

double interval_bound(const RCNet& net, const IntervalBox& input_box) {
  net.validate();
  if (input_box.dim() != net.d_in()) {
    throw ValidationError("interval_bound: box dimension does not match net input");
  }
  double m = 0.0;
  IntervalBox state = bound_affine(net.pre, input_box);
  m = std::max(m, state.max_abs());
  for (int s = 0; s < net.reps; ++s) {
    NetBounds nb = bound_net(net.block, state);
    m = std::max(m, nb.max_abs_preact);
    state = nb.out;
    if (!std::isfinite(m) || m > kHugeBound) {
      throw NumericError("interval_bound: state bounds overflow at repetition " +
                         std::to_string(s));
    }
  }
  IntervalBox out = bound_affine(net.post, state);
  m = std::max(m, out.max_abs());
  if (!std::isfinite(m) || m > kHugeBound) {
    throw NumericError("interval_bound: output bounds overflow");
  }
  return m;
}

}  // namespace rcnet
