#include "rcnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rcnet/approximator.hpp"
#include "rcnet/errors.hpp"
#include "rcnet/rng.hpp"

namespace rcnet {
namespace {

constexpr std::int64_t kChunk = 4096;

// Compensated running sum.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

void scan_chunk(const RCNet& net, const TargetFunction& target, const Mat& X,
                const std::vector<std::uint8_t>* mask, ErrorReport& rep) {
  const Mat out = eval_rcnet_batch(net, X);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Vec x = X.col(c);
    const double err = std::abs(out(0, c) - target.f(x));
    rep.sup_all = std::max(rep.sup_all, err);
    ++rep.grid_points;
    if (mask == nullptr || (*mask)[static_cast<std::size_t>(c)] == 0) {
      rep.sup_off = std::max(rep.sup_off, err);
      ++rep.grid_points_off;
    }
  }
}

}  // namespace

int default_grid_per_dim(int d) {
  switch (d) {
    case 1:
      return 4001;
    case 2:
      return 201;
    case 3:
      return 51;
    default:
      throw ValidationError("grid sweeps support dimensions 1 to 3 only");
  }
}

Mat make_grid(int d, int per_dim) {
  if (d < 1) throw ValidationError("grid dimension must be positive");
  if (per_dim < 2) throw ValidationError("grid needs at least two points per axis");
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= per_dim;
  Mat X(d, total);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (std::int64_t c = 0; c < total; ++c) {
    for (int i = 0; i < d; ++i)
      X(i, c) = static_cast<double>(idx[static_cast<std::size_t>(i)]) / (per_dim - 1);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < per_dim) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return X;
}

FeedForwardNet strip_inert_units(const FeedForwardNet& net) {
  FeedForwardNet out = net;
  bool changed = true;
  while (changed) {
    changed = false;
    // Hidden unit layers are 0 .. depth-1; the final affine is never a unit layer.
    for (std::size_t l = 0; l + 1 < out.layers.size(); ++l) {
      AffineMap& here = out.layers[l];
      AffineMap& next = out.layers[l + 1];
      std::vector<int> keep;
      for (int u = 0; u < here.out_dim(); ++u)
        if (here.b(u) != 0.0 || here.W.row(u).cwiseAbs().sum() != 0.0) keep.push_back(u);
      if (static_cast<int>(keep.size()) == here.out_dim()) continue;
      // A layer must keep at least one unit to stay well-formed; a layer
      // already reduced to a single (zero) unit is minimal — rebuilding it
      // would loop forever without progress.
      if (keep.empty()) {
        if (here.out_dim() == 1) continue;
        keep.push_back(0);
      }
      Mat Wh(static_cast<Eigen::Index>(keep.size()), here.in_dim());
      Vec bh(static_cast<Eigen::Index>(keep.size()));
      Mat Wn(next.out_dim(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        Wh.row(static_cast<Eigen::Index>(i)) = here.W.row(keep[i]);
        bh(static_cast<Eigen::Index>(i)) = here.b(keep[i]);
        Wn.col(static_cast<Eigen::Index>(i)) = next.W.col(keep[i]);
      }
      here = AffineMap{Wh, bh};
      next = AffineMap{Wn, next.b};
      changed = true;
    }
  }
  out.validate();
  return out;
}

RCNet strip_inert_units(const RCNet& net) {
  RCNet out = net;
  out.block = strip_inert_units(net.block);
  out.validate();
  return out;
}

ErrorReport measure_errors(const RCNet& net, const TargetFunction& target,
                           const VerifySpec& spec) {
  target.validate();
  if (net.d_in() != target.d)
    throw ValidationError("net input dimension does not match the target");
  if (net.d_out() != 1)
    throw ValidationError("error measurement expects a scalar-output net");
  const RCNet lean = strip_inert_units(net);

  ErrorReport rep;
  if (spec.grid_per_dim > 0) {
    const Mat X = make_grid(target.d, spec.grid_per_dim);
    std::vector<std::uint8_t> mask;
    const bool split = spec.K > 0;
    if (split) mask = trifling_mask(X, spec.K, spec.delta);
    for (std::int64_t start = 0; start < X.cols(); start += kChunk) {
      const std::int64_t len = std::min<std::int64_t>(kChunk, X.cols() - start);
      const Mat chunk = X.middleCols(start, len);
      std::vector<std::uint8_t> chunk_mask;
      if (split)
        chunk_mask.assign(mask.begin() + start, mask.begin() + start + len);
      scan_chunk(lean, target, chunk, split ? &chunk_mask : nullptr, rep);
    }
    if (!split) {
      rep.sup_off = rep.sup_all;
      rep.grid_points_off = rep.grid_points;
    }
  }

  if (spec.mc_samples > 0) {
    if (!(spec.p >= 1.0) || !std::isfinite(spec.p))
      throw ValidationError("norm exponent must satisfy 1 <= p < infinity");
    Rng rng(spec.seed);
    KahanSum moment;       // sum |err|^p
    KahanSum moment_sq;    // sum |err|^{2p}
    std::int64_t done = 0;
    Mat X(target.d, kChunk);
    while (done < spec.mc_samples) {
      const std::int64_t len = std::min<std::int64_t>(kChunk, spec.mc_samples - done);
      for (std::int64_t c = 0; c < len; ++c)
        for (int i = 0; i < target.d; ++i) X(i, c) = rng.uniform01();
      const Mat chunk = X.leftCols(len);
      const Mat out = eval_rcnet_batch(lean, chunk);
      for (Eigen::Index c = 0; c < len; ++c) {
        const Vec x = chunk.col(c);
        const double err = std::abs(out(0, c) - target.f(x));
        const double powed = std::pow(err, spec.p);
        moment.add(powed);
        moment_sq.add(powed * powed);
      }
      done += len;
    }
    const double n = static_cast<double>(spec.mc_samples);
    const double mean = moment.sum / n;
    double var = 0.0;
    if (spec.mc_samples > 1) {
      var = std::max(0.0, (moment_sq.sum / n - mean * mean) * (n / (n - 1.0)));
    }
    const double se_mean = std::sqrt(var / n);
    rep.mc_lp = std::pow(mean, 1.0 / spec.p);
    rep.mc_se = (mean > 0.0)
                    ? se_mean * std::pow(mean, 1.0 / spec.p - 1.0) / spec.p
                    : se_mean;  // conservative when the estimate is exactly zero
    rep.mc_samples = spec.mc_samples;
  }
  return rep;
}

}  // namespace rcnet
