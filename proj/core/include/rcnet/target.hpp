#pragma once

#include <functional>
#include <string>

#include "rcnet/affine.hpp"
#include "rcnet/errors.hpp"

namespace rcnet {

// A continuous scalar function on the unit cube together with the metadata the
// constructions need: a modulus-of-continuity bound (w.r.t. the euclidean
// norm) and coarse magnitude information.
struct TargetFunction {
  int d = 1;
  std::function<double(const Vec&)> f;
  // Upper bound on sup{|f(x)-f(y)| : x,y in [0,1]^d, |x-y|_2 <= t}.
  std::function<double(double)> omega;
  double f0 = 0.0;       // f at the origin
  double sup_abs = 0.0;  // bound on sup |f| over the cube
  std::string name;
  bool omega_exact = false;  // true when omega is a proven bound, not an estimate

  double eval(const Vec& x) const { return f(x); }
  void validate() const;
};

// f(x) = (|x_1| + ... + |x_d|) / d with its exact modulus min(t/sqrt(d), 1).
TargetFunction make_abs1_target(int d);

// f(x) = sin(pi x)/pi on [0,1] with its exact modulus (2/pi) sin(pi min(t,1)/2).
TargetFunction make_sinpi_target();

// Constant function with zero modulus.
TargetFunction make_const_target(int d, double value);

// Smooth oscillatory two-dimensional benchmark target (sampled modulus).
TargetFunction make_trig2d_target();

// Piecewise-linear interpolant of "x,y" rows covering [0,1]; modulus from the
// maximum slope.
TargetFunction make_csv_target(const std::string& path);

// Sampled estimate of the modulus of continuity, inflated by a safety factor.
// Deterministic for a given (f, d, t).
std::function<double(double)> estimate_modulus(std::function<double(const Vec&)> f, int d);

// Parses a CLI-style target description: "abs1", "sinpi", "trig2d",
// "const:<value>", or "csv:<path>". `d` is used by targets that work in any
// dimension and must match the fixed dimension of the others.
TargetFunction parse_target_spec(const std::string& spec, int d);

}  // namespace rcnet
