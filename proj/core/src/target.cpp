#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "rcnet/rng.hpp"
#include "rcnet/target.hpp"

namespace rcnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec clamp_to_cube(Vec x) {
  for (int i = 0; i < x.size(); ++i) x(i) = std::min(1.0, std::max(0.0, x(i)));
  return x;
}

uint64_t hash_double(double t) {
  uint64_t u = 0;
  std::memcpy(&u, &t, sizeof(u));
  u ^= 0x9E3779B97F4A7C15ULL;
  u *= 0xBF58476D1CE4E5B9ULL;
  return u;
}

}  // namespace

void TargetFunction::validate() const {
  if (d < 1) throw ValidationError("TargetFunction: dimension must be >= 1");
  if (!f) throw ValidationError("TargetFunction: missing function");
  if (!omega) throw ValidationError("TargetFunction: missing modulus");
}

TargetFunction make_abs1_target(int d) {
  if (d < 1) throw ValidationError("make_abs1_target: dimension must be >= 1");
  TargetFunction t;
  t.d = d;
  t.f = [d](const Vec& x) { return x.cwiseAbs().sum() / static_cast<double>(d); };
  const double root_d = std::sqrt(static_cast<double>(d));
  t.omega = [root_d](double h) {
    if (h <= 0.0) return 0.0;
    return std::min(h / root_d, 1.0);
  };
  t.f0 = 0.0;
  t.sup_abs = 1.0;
  t.name = "abs1";
  t.omega_exact = true;
  return t;
}

TargetFunction make_sinpi_target() {
  TargetFunction t;
  t.d = 1;
  t.f = [](const Vec& x) { return std::sin(kPi * x(0)) / kPi; };
  t.omega = [](double h) {
    if (h <= 0.0) return 0.0;
    return (2.0 / kPi) * std::sin(kPi * std::min(h, 1.0) / 2.0);
  };
  t.f0 = 0.0;
  t.sup_abs = 1.0 / kPi;
  t.name = "sinpi";
  t.omega_exact = true;
  return t;
}

TargetFunction make_const_target(int d, double value) {
  if (d < 1) throw ValidationError("make_const_target: dimension must be >= 1");
  if (!std::isfinite(value)) throw ValidationError("make_const_target: value must be finite");
  TargetFunction t;
  t.d = d;
  t.f = [value](const Vec&) { return value; };
  t.omega = [](double) { return 0.0; };
  t.f0 = value;
  t.sup_abs = std::abs(value);
  t.name = "const";
  t.omega_exact = true;
  return t;
}

TargetFunction make_trig2d_target() {
  const double a[2][2] = {{0.3, 0.2}, {0.2, 0.3}};
  const double b[2] = {2.0 * kPi, 4.0 * kPi};
  const double c[2][2] = {{2.0 * kPi, 4.0 * kPi}, {8.0 * kPi, 4.0 * kPi}};
  const double dd[2][2] = {{4.0 * kPi, 6.0 * kPi}, {8.0 * kPi, 6.0 * kPi}};
  auto f = [=](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        s += a[i][j] * std::sin(b[i] * x(i) + c[i][j] * x(i) * x(j)) *
             std::cos(b[j] * x(j) + dd[i][j] * x(i) * x(i));
      }
    }
    return s;
  };

  TargetFunction t;
  t.d = 2;
  t.f = f;
  t.omega = estimate_modulus(f, 2);
  Vec zero = Vec::Zero(2);
  t.f0 = f(zero);
  double sup = 0.0;
  Rng rng(0x7216D5A5u);
  Vec x(2);
  for (int s = 0; s < 40000; ++s) {
    x(0) = rng.uniform01();
    x(1) = rng.uniform01();
    sup = std::max(sup, std::abs(f(x)));
  }
  t.sup_abs = 1.05 * sup;
  t.name = "trig2d";
  t.omega_exact = false;
  return t;
}

TargetFunction make_csv_target(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("make_csv_target: cannot open " + path);
  std::vector<double> xs;
  std::vector<double> ys;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    double x = 0.0;
    double y = 0.0;
    char comma = 0;
    if (!(ss >> x >> comma >> y) || comma != ',') {
      throw ValidationError("make_csv_target: bad row at line " + std::to_string(lineno) +
                            " of " + path + " (expected x,y)");
    }
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw ValidationError("make_csv_target: non-finite value at line " +
                            std::to_string(lineno));
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  if (xs.size() < 2) throw ValidationError("make_csv_target: need at least two rows");
  for (size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) {
      throw ValidationError("make_csv_target: x values must be strictly increasing");
    }
  }
  if (std::abs(xs.front()) > 1e-12 || std::abs(xs.back() - 1.0) > 1e-12) {
    throw ValidationError("make_csv_target: x values must cover [0, 1]");
  }
  xs.front() = 0.0;
  xs.back() = 1.0;

  double lip = 0.0;
  double ymin = ys[0];
  double ymax = ys[0];
  for (size_t i = 1; i < xs.size(); ++i) {
    lip = std::max(lip, std::abs(ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]));
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  const double range = ymax - ymin;

  auto f = [xs, ys](const Vec& v) {
    const double x = std::min(1.0, std::max(0.0, v(0)));
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    size_t hi = std::min(xs.size() - 1, static_cast<size_t>(it - xs.begin()));
    if (hi == 0) hi = 1;
    const size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + w * (ys[hi] - ys[lo]);
  };

  TargetFunction t;
  t.d = 1;
  t.f = f;
  t.omega = [lip, range](double h) {
    if (h <= 0.0) return 0.0;
    return std::min(lip * h, range);
  };
  Vec zero = Vec::Zero(1);
  t.f0 = f(zero);
  t.sup_abs = std::max(std::abs(ymin), std::abs(ymax));
  t.name = "csv";
  t.omega_exact = true;
  return t;
}

std::function<double(double)> estimate_modulus(std::function<double(const Vec&)> f, int d) {
  if (d < 1) throw ValidationError("estimate_modulus: dimension must be >= 1");
  if (!f) throw ValidationError("estimate_modulus: missing function");
  return [f = std::move(f), d](double t) {
    if (t <= 0.0) return 0.0;
    Rng rng(0x5EEDBA5Eu ^ hash_double(t));
    Vec x(d);
    Vec u(d);
    double worst = 0.0;
    constexpr int kPairs = 20000;
    for (int s = 0; s < kPairs; ++s) {
      for (int i = 0; i < d; ++i) x(i) = rng.uniform01();
      // Random direction: mix axis-aligned probes with random ones.
      if (s % 4 == 0) {
        u.setZero();
        u(s / 4 % d) = (s % 8 == 0) ? 1.0 : -1.0;
      } else {
        double norm2 = 0.0;
        do {
          norm2 = 0.0;
          for (int i = 0; i < d; ++i) {
            u(i) = rng.uniform(-1.0, 1.0);
            norm2 += u(i) * u(i);
          }
        } while (norm2 < 1e-12 || norm2 > 1.0);
        u /= std::sqrt(norm2);
      }
      const Vec y = clamp_to_cube(x + t * u);
      worst = std::max(worst, std::abs(f(x) - f(y)));
    }
    return 1.1 * worst;
  };
}

TargetFunction parse_target_spec(const std::string& spec, int d) {
  if (spec == "abs1") return make_abs1_target(d);
  if (spec == "sinpi") {
    if (d != 1) throw ValidationError("target sinpi is one-dimensional");
    return make_sinpi_target();
  }
  if (spec == "trig2d") {
    if (d != 2) throw ValidationError("target trig2d is two-dimensional");
    return make_trig2d_target();
  }
  if (spec.rfind("const:", 0) == 0) {
    const std::string tail = spec.substr(6);
    size_t pos = 0;
    double value = 0.0;
    try {
      value = std::stod(tail, &pos);
    } catch (const std::exception&) {
      throw ValidationError("bad constant in target spec: " + spec);
    }
    if (pos != tail.size()) throw ValidationError("bad constant in target spec: " + spec);
    return make_const_target(d, value);
  }
  if (spec.rfind("csv:", 0) == 0) {
    if (d != 1) throw ValidationError("csv targets are one-dimensional");
    return make_csv_target(spec.substr(4));
  }
  throw ValidationError("unknown target spec: " + spec +
                        " (expected abs1, sinpi, trig2d, const:<value>, or csv:<path>)");
}

}  // namespace rcnet
