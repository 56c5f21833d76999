#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "uniconv/errors.hpp"

namespace uniconv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// ||v||_p for p in (1, inf).  p = 2 short-circuits to the Euclidean norm.
inline double p_norm(const Vec& v, double p) {
  if (p <= 1.0 || !std::isfinite(p))
    throw Error(errc::invalid_parameter, "norm exponent must lie in (1, inf)");
  if (p == 2.0) return v.norm();
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  return std::pow(s, 1.0 / p);
}

inline double operator_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  return M.jacobiSvd().singularValues()(0);
}

inline double smallest_singular_value(const Mat& M) {
  if (M.size() == 0) return 0.0;
  auto sv = M.jacobiSvd().singularValues();
  return sv(sv.size() - 1);
}

/// Moore-Penrose least-squares solve, rank-revealing via SVD.
inline Vec pinv_solve(const Mat& M, const Vec& rhs) {
  return M.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

inline Vec gaussian_vec(int n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// Uniform direction on the Euclidean unit sphere.
inline Vec unit_dir(int n, Rng& rng) {
  for (;;) {
    Vec v = gaussian_vec(n, rng);
    double nrm = v.norm();
    if (nrm > 1e-12) return v / nrm;
  }
}

// --- low-discrepancy sampling ---------------------------------------------

inline double halton(std::uint64_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  for (std::uint64_t i = index + 1; i > 0; i /= base) {
    f /= base;
    r += f * static_cast<double>(i % base);
  }
  return r;
}

/// Halton point in [0,1)^dim, bases 2,3,5,...  Deterministic in `index`.
inline Vec halton_point(std::uint64_t index, int dim) {
  static constexpr unsigned bases[] = {2, 3, 5, 7, 11, 13, 17, 19};
  if (dim < 1 || dim > 8)
    throw Error(errc::unsupported, "halton_point supports dim in [1,8]");
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = halton(index, bases[k]);
  return v;
}

/// Deterministic, well-spread unit directions: golden-angle fan in the plane,
/// Fibonacci lattice on S^2, seeded Gaussians beyond.
inline std::vector<Vec> sphere_grid(int n, int count, std::uint64_t seed = 7) {
  std::vector<Vec> dirs;
  dirs.reserve(count);
  if (n == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    if (count > 1) dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      double th = 2.0 * std::numbers::pi * k / count;
      dirs.push_back((Vec(2) << std::cos(th), std::sin(th)).finished());
    }
    return dirs;
  }
  if (n == 3) {
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      double z = 1.0 - (2.0 * k + 1.0) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double th = ga * k;
      dirs.push_back(
          (Vec(3) << r * std::cos(th), r * std::sin(th), z).finished());
    }
    return dirs;
  }
  Rng rng(seed);
  for (int k = 0; k < count; ++k) dirs.push_back(unit_dir(n, rng));
  return dirs;
}

// --- scalar / derivative-free optimisation helpers -------------------------

/// Golden-section maximisation of a unimodal f on [a, b].
template <class F>
double golden_max(F&& f, double a, double b, int iters = 90) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    }
  }
  return 0.5 * (a + b);
}

/// Coordinate pattern search: maximises f from x with shrinking steps,
/// restricted to points where `feasible` holds.
template <class F, class Feas>
Vec pattern_max(F&& f, Feas&& feasible, Vec x, double step, double step_min,
                int max_iter = 400) {
  const int n = static_cast<int>(x.size());
  double fx = f(x);
  for (int it = 0; it < max_iter && step > step_min; ++it) {
    bool improved = false;
    for (int i = 0; i < n; ++i) {
      for (double s : {step, -step}) {
        Vec cand = x;
        cand[i] += s;
        if (!feasible(cand)) continue;
        double fc = f(cand);
        if (fc > fx + 1e-15 * (1.0 + std::abs(fx))) {
          x = cand;
          fx = fc;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return x;
}

/// Orthonormal basis of the hyperplane orthogonal to a unit vector u,
/// as the trailing n-1 columns of a Householder Q.
inline Mat tangent_basis(const Vec& u) {
  const int n = static_cast<int>(u.size());
  Eigen::HouseholderQR<Mat> qr(u);
  Mat Q = qr.householderQ() * Mat::Identity(n, n);
  return Q.rightCols(n - 1);
}

}  // namespace uniconv
