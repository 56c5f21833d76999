#pragma once

// The convexity-preservation certificate: a smooth map f sends a set with
// power-2 modulus constant c to a uniformly convex image whenever
//   reg(f; x0) * lip(Df) / 8 < c
// on a ball containing the set.  This header checks the condition, derives
// the quantitative payload (eta, beta, sigma and the image modulus constant
// sigma * eta / beta^2), and estimates the openness rate the certificate
// promises.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uniconv/calculus.hpp"
#include "uniconv/errors.hpp"
#include "uniconv/geometry.hpp"
#include "uniconv/numeric.hpp"

namespace uniconv::certify {

struct Certificate {
  bool certified = false;
  double c = kNaN;              // power-2 constant of the source set
  double reg = kInf;            // metric regularity of f at x0
  double lip = kNaN;            // Lipschitz constant of Df on the region
  double condition_lhs = kInf;  // reg * lip / 8
  double slack = kNaN;          // c - condition_lhs
  std::string reason;           // failure diagnostics when not certified

  // Quantitative payload, filled by certify_problem on success.
  double rho = kNaN;   // verified radius with S contained in B(x0, rho)
  double eta = 0.0;    // convexity surplus retained by the image
  double beta = 1.0;   // strict majorant of sup_S |Df|
  double sigma = 0.0;  // openness rate used for the image modulus
  double image_modulus_constant = 0.0;  // sigma * eta / beta^2
};

/// Strict test of the certificate inequality.  `certified` demands a margin
/// of 1e-12 * max(1, c) so that borderline instances fail deterministically.
inline Certificate check_condition(double c,
                                   const calculus::RegularityBound& reg,
                                   const calculus::LipschitzBound& lip) {
  if (c <= 0.0)
    throw Error(errc::invalid_parameter, "power-2 constant must be positive");
  if (lip.value < 0.0)
    throw Error(errc::invalid_parameter, "negative Lipschitz constant");
  Certificate cert;
  cert.c = c;
  cert.reg = reg.value;
  cert.lip = lip.value;
  if (!reg.surjective) {
    cert.condition_lhs = kInf;
    cert.slack = -kInf;
    cert.reason = "derivative not surjective at the base point";
    return cert;
  }
  cert.condition_lhs = reg.value * lip.value / 8.0;
  cert.slack = c - cert.condition_lhs;
  if (cert.slack > 1e-12 * std::max(1.0, c)) {
    cert.certified = true;
  } else {
    cert.reason = "condition reg*lip/8 < c fails: " +
                  std::to_string(cert.condition_lhs) + " vs c = " +
                  std::to_string(c);
  }
  return cert;
}

/// Largest ball radius the certificate accepts around x0 in a space with
/// modulus constant gamma: balls of radius r have c = gamma / r, so the
/// condition holds strictly for r = 8 gamma / (reg * lip + 1).
inline double admissible_radius(double gamma,
                                const calculus::RegularityBound& reg,
                                const calculus::LipschitzBound& lip) {
  if (gamma <= 0.0)
    throw Error(errc::invalid_parameter, "gamma must be positive");
  if (!reg.surjective)
    throw Error(errc::not_onto,
                "no admissible radius: derivative not surjective");
  return 8.0 * gamma / (reg.value * lip.value + 1.0);
}

// --- empirical openness rate ------------------------------------------------

struct OpennessEstimate {
  double sigma_hat = 0.0;     // measured covering rate
  double sigma_theory = 0.0;  // 1 / reg(f; x0), 0 when not surjective
};

namespace detail {

/// Damped Newton inverse solve: does y have a preimage within t of base?
inline bool newton_hit(const calculus::SmoothMapSpec& f, const Vec& start,
                       const Vec& base, const Vec& y, double t) {
  Vec z = start;
  double res = (eval_map(f, z) - y).norm();
  for (int it = 0; it < 80; ++it) {
    if (res <= 1e-12 * (1.0 + y.norm()))
      return (z - base).norm() <= t * (1.0 + 1e-9);
    Vec step = pinv_solve(jacobian(f, z), Vec(y - eval_map(f, z)));
    double alpha = 1.0;
    bool moved = false;
    while (alpha >= 1e-6) {
      Vec cand = z + alpha * step;
      double rc = (eval_map(f, cand) - y).norm();
      if (rc < res * (1.0 - 1e-4 * alpha)) {
        z = cand;
        res = rc;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) return false;
  }
  return false;
}

inline bool covered(const calculus::SmoothMapSpec& f, const Vec& base,
                    const Vec& y, double t) {
  if (newton_hit(f, base, base, y, t)) return true;
  // Multistart: a preimage can hide on the far side of a fold.
  for (const Vec& u : sphere_grid(f.input_dim(), 8))
    if (newton_hit(f, Vec(base + 0.5 * t * u), base, y, t)) return true;
  return false;
}

}  // namespace detail

/// Measures the linear openness rate of f near x0: the largest s such that
/// ball(f(b), s*t) stays inside f(ball(b, t)) for each tested base b and
/// each radius t in `radii`.  Bases are x0 and points offset by half the
/// largest radius; targets are fanned over `samples` image directions.
inline OpennessEstimate estimate_openness_rate(const calculus::SmoothMapSpec& f,
                                               const Vec& x0,
                                               std::span<const double> radii,
                                               int samples,
                                               std::uint64_t seed = 2026) {
  if (radii.empty())
    throw Error(errc::invalid_parameter, "radius grid is empty");
  for (double r : radii)
    if (r <= 0.0)
      throw Error(errc::invalid_parameter, "radii must be positive");
  if (samples < 4)
    throw Error(errc::invalid_parameter, "need at least 4 target directions");

  OpennessEstimate est;
  auto reg = calculus::reg_bound(f, x0);
  est.sigma_theory = reg.surjective ? 1.0 / reg.value : 0.0;

  const int n = f.input_dim();
  const int m = f.output_dim();
  const double rmax = *std::max_element(radii.begin(), radii.end());
  std::vector<Vec> bases{x0};
  for (const Vec& u : sphere_grid(n, 4, seed))
    bases.push_back(x0 + 0.1 * rmax * u);
  const auto targets = sphere_grid(m, samples, seed + 1);

  const double s_hi =
      est.sigma_theory > 0.0 ? 1.2 * est.sigma_theory
                             : operator_norm(jacobian(f, x0)) + 1.0;
  double sigma = kInf;
  for (const Vec& b : bases) {
    const Vec fb = eval_map(f, b);
    for (double t : radii) {
      auto all_hit = [&](double s) {
        for (const Vec& v : targets)
          if (!detail::covered(f, b, Vec(fb + (s * t) * v), t)) return false;
        return true;
      };
      double lo = 0.0, hi = s_hi;
      if (all_hit(hi)) {
        lo = hi;
      } else {
        for (int it = 0; it < 40; ++it) {
          double mid = 0.5 * (lo + hi);
          (all_hit(mid) ? lo : hi) = mid;
        }
      }
      sigma = std::min(sigma, lo);
    }
  }
  est.sigma_hat = std::isfinite(sigma) ? sigma : 0.0;
  if (est.sigma_theory > 0.0)
    est.sigma_hat = std::min(est.sigma_hat, est.sigma_theory);
  return est;
}

// --- end-to-end certification ---------------------------------------------

/// Upper bound on sup_{x in S} |x - x0|, analytic per set kind.
inline double containment_radius(const geometry::ConvexSetSpec& set,
                                 const Vec& x0) {
  using geometry::BallIntersection;
  using geometry::PNormBall;
  using geometry::SublevelSet;
  if (const auto* b = std::get_if<PNormBall>(&set.body()))
    return (b->center - x0).norm() + b->radius;
  if (const auto* bi = std::get_if<BallIntersection>(&set.body())) {
    double best = kInf;
    for (const Vec& c : bi->centers)
      best = std::min(best, (c - x0).norm() + bi->radius);
    return best;
  }
  const auto& sl = std::get<SublevelSet>(set.body());
  Vec xstar = set.interior_point();
  Eigen::SelfAdjointEigenSolver<Mat> es(sl.phi.A);
  const double s = 2.0 * (sl.alpha - sl.phi.value(xstar));
  return (xstar - x0).norm() + std::sqrt(s / es.eigenvalues().minCoeff());
}

struct CertifyOptions {
  int samples = 4000;        // set samples for the derivative sup
  int fan = 16;              // image directions per openness probe
  std::uint64_t seed = 2026;
};

/// Full certificate for f on S around x0 with Lipschitz region B(x0, r0):
/// extracts c from the set catalogue, verifies S is contained in the region,
/// checks the strict condition, and on success fixes eta at half the slack
/// (shrunk if needed so that eta * diam(f(S))^2 < rho * beta^2), measures
/// the openness rate and reports the image modulus constant.
inline Certificate certify_problem(const calculus::SmoothMapSpec& f,
                                   const geometry::ConvexSetSpec& set,
                                   const Vec& x0, double r0,
                                   const CertifyOptions& opts = {}) {
  if (set.ambient_p() != 2.0)
    throw Error(errc::unsupported,
                "certificates require the Euclidean ambient norm");
  if (x0.size() != set.dimension() || set.dimension() != f.input_dim())
    throw Error(errc::dimension_mismatch, "set, map and point dims disagree");
  if (r0 <= 0.0)
    throw Error(errc::invalid_parameter, "region radius must be positive");

  auto c_opt = set.power2_constant();
  if (!c_opt) {
    Certificate cert;
    cert.reason = "set has no power-2 modulus constant";
    return cert;
  }
  auto reg = calculus::reg_bound(f, x0);
  auto lip = calculus::lip_derivative(f, calculus::BallRegion{x0, r0});
  Certificate cert = check_condition(*c_opt, reg, lip);

  const double rho = containment_radius(set, x0);
  cert.rho = rho;
  if (rho > r0 * (1.0 + 1e-12)) {
    cert.certified = false;
    cert.reason = "set leaves the Lipschitz region: rho = " +
                  std::to_string(rho) + " > r0 = " + std::to_string(r0);
    return cert;
  }
  if (!cert.certified) return cert;

  cert.eta = 0.5 * cert.slack;
  auto idb = calculus::image_diameter_bound(f, set, opts.samples, opts.seed);
  cert.beta = idb.beta;
  // Keep the image-modulus argument inside the neighborhood where the
  // openness rate is valid: eta * diam(f(S))^2 <= rho * beta^2.
  if (idb.bound > 0.0) {
    double cap = 0.99 * rho * cert.beta * cert.beta / (idb.bound * idb.bound);
    cert.eta = std::min(cert.eta, cap);
  }
  // The theorem's openness rate is local around x0; probe it at scales small
  // against the region radius, anchored by 1/reg.
  const double radii[] = {0.01 * r0, 0.025 * r0, 0.05 * r0};
  auto open = estimate_openness_rate(f, x0, radii, opts.fan, opts.seed + 7);
  cert.sigma = std::min(open.sigma_hat, open.sigma_theory);
  cert.image_modulus_constant = cert.sigma * cert.eta / (cert.beta * cert.beta);
  return cert;
}

}  // namespace uniconv::certify
