#pragma once

#include <vector>

#include <Eigen/Core>

#include "rcnet/errors.hpp"

namespace rcnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dense affine map x |-> W x + b.
struct AffineMap {
  Mat W;  // out_dim x in_dim
  Vec b;  // out_dim

  AffineMap() = default;
  AffineMap(Mat W_, Vec b_);

  int in_dim() const { return static_cast<int>(W.cols()); }
  int out_dim() const { return static_cast<int>(W.rows()); }

  void validate() const;

  static AffineMap identity(int d);
  static AffineMap zero(int out_dim, int in_dim);
};

Vec eval_affine(const AffineMap& a, const Vec& x);
// Columns of X are input points; returns one output column per input column.
Mat eval_affine_batch(const AffineMap& a, const Mat& X);

// (outer o inner)(x) = outer(inner(x)).
AffineMap compose(const AffineMap& outer, const AffineMap& inner);

// Selects coordinates idx from R^in_dim: out_i = x_{idx[i]}.
AffineMap coord_select(const std::vector<int>& idx, int in_dim);
// Places input coordinate i at output row idx[i] of R^out_dim; other rows 0.
AffineMap coord_embed(const std::vector<int>& idx, int out_dim);

// Block-diagonal sum: (a ⊕ b)(x, y) = (a(x), b(y)).
AffineMap direct_sum(const AffineMap& a, const AffineMap& b);
// Same input, concatenated outputs: x |-> (a(x), b(x)). Requires equal in_dim.
AffineMap vstack(const AffineMap& a, const AffineMap& b);

// Diagonal scaling map x |-> diag(s) x.
AffineMap diag_map(const Vec& s);

}  // namespace rcnet
