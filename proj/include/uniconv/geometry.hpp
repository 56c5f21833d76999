#pragma once

// Uniformly convex sets in R^n: analytic moduli of convexity for the standard
// constructions (p-norm balls, intersections of balls, sublevel sets of
// uniformly convex functions), plus sampled estimators used to cross-check
// the analytic bounds.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "uniconv/errors.hpp"
#include "uniconv/numeric.hpp"

namespace uniconv::geometry {

/// Axis-aligned box, used for rejection sampling and rasterisation windows.
struct Box {
  Vec lo, hi;

  int dimension() const { return static_cast<int>(lo.size()); }
  double diag() const { return (hi - lo).norm(); }

  Vec map01(const Vec& u) const {
    return (lo.array() + u.array() * (hi - lo).array()).matrix();
  }

  Box expanded(double pad) const {
    Box b = *this;
    b.lo.array() -= pad;
    b.hi.array() += pad;
    return b;
  }
};

/// Anything that can report a signed inward margin.  margin(x) >= 0 implies
/// membership, and margin is a lower bound on the ambient-norm distance from
/// x to the complement (exact for balls and their intersections).
template <class S>
concept MembershipSet = requires(const S& s, const Vec& x) {
  { s.dimension() } -> std::convertible_to<int>;
  { s.ambient_p() } -> std::convertible_to<double>;
  { s.margin(x) } -> std::convertible_to<double>;
  { s.interior_point() } -> std::convertible_to<Vec>;
  { s.bounding_box() } -> std::convertible_to<Box>;
  { s.diameter() } -> std::convertible_to<double>;
};

// --- moduli of convexity ----------------------------------------------------

/// Lower bound delta(epsilon) >= c * epsilon^2 on a modulus of convexity.
/// `c_global` marks whether c is valid for every chord length up to diam or
/// only for chords of length >= epsilon (the tail constant reported for
/// l^p balls with p > 2, whose modulus decays like epsilon^p near zero).
struct ModulusBound {
  double epsilon = 0.0;
  double delta = 0.0;
  double c = 0.0;
  double diam = kNaN;
  bool c_global = true;
};

/// Modulus of convexity of the unit ball of l^p (any dimension >= 2).
/// For p >= 2 the value is exact and attained by disjointly supported chords:
///   delta(eps) = 1 - (1 - (eps/2)^p)^(1/p).
/// For p in (1, 2) we return the quadratic lower bound (p-1)/8 * eps^2,
/// which holds with a global power-2 constant.
inline ModulusBound modulus_lp_ball(double p, double epsilon) {
  if (p <= 1.0 || !std::isfinite(p))
    throw Error(errc::invalid_parameter, "p must lie in (1, inf)");
  if (epsilon < 0.0 || epsilon > 2.0)
    throw Error(errc::invalid_parameter,
                "chord length must lie in [0, 2] for the unit ball");
  ModulusBound mb;
  mb.epsilon = epsilon;
  mb.diam = 2.0;
  if (p < 2.0) {
    mb.delta = (p - 1.0) / 8.0 * epsilon * epsilon;
    mb.c = (p - 1.0) / 8.0;
    mb.c_global = true;
    return mb;
  }
  mb.delta = 1.0 - std::pow(1.0 - std::pow(epsilon / 2.0, p), 1.0 / p);
  if (p == 2.0) {
    mb.c = 1.0 / 8.0;  // delta(eps) = 1 - sqrt(1 - eps^2/4) >= eps^2/8
    mb.c_global = true;
  } else {
    // No global power-2 constant exists for p > 2; delta/eps^2 is
    // nondecreasing, so delta(eps)/eps^2 is valid for chords >= eps.
    mb.c = epsilon > 0.0 ? mb.delta / (epsilon * epsilon) : 0.0;
    mb.c_global = false;
  }
  return mb;
}

/// Modulus of an r-convex set (intersection of balls of radius r) in a space
/// whose own modulus satisfies delta_X(t) >= gamma * t^2:
///   delta_S(eps) >= r * delta_X(eps / r) >= (gamma / r) * eps^2.
inline ModulusBound modulus_scaled(double gamma, double r, double epsilon) {
  if (gamma <= 0.0 || r <= 0.0)
    throw Error(errc::invalid_parameter, "gamma and r must be positive");
  if (epsilon < 0.0 || epsilon > 2.0 * r)
    throw Error(errc::invalid_parameter, "chord exceeds set diameter 2r");
  ModulusBound mb;
  mb.epsilon = epsilon;
  mb.c = gamma / r;
  mb.delta = mb.c * epsilon * epsilon;
  mb.diam = 2.0 * r;
  mb.c_global = true;
  return mb;
}

/// Modulus of a uniformly convex function, theta(s) = kappa * s^power.
struct ThetaSpec {
  double kappa = 1.0;
  double power = 2.0;

  double operator()(double s) const { return kappa * std::pow(s, power); }
};

/// Modulus of the sublevel set {phi <= alpha} of a function that is uniformly
/// convex with modulus theta and Lipschitz with constant lip_phi on the set:
///   delta_S(eps) >= theta(eps) / (4 * lip_phi).
inline ModulusBound modulus_sublevel(const ThetaSpec& theta, double lip_phi,
                                     double epsilon) {
  if (theta.kappa <= 0.0 || theta.power < 2.0)
    throw Error(errc::invalid_parameter, "theta must be kappa*s^q, q >= 2");
  if (lip_phi <= 0.0)
    throw Error(errc::invalid_parameter, "lip_phi must be positive");
  if (epsilon < 0.0)
    throw Error(errc::invalid_parameter, "chord length must be nonnegative");
  ModulusBound mb;
  mb.epsilon = epsilon;
  mb.delta = theta(epsilon) / (4.0 * lip_phi);
  if (theta.power == 2.0) {
    mb.c = theta.kappa / (4.0 * lip_phi);
    mb.c_global = true;
  } else {
    mb.c = epsilon > 0.0 ? mb.delta / (epsilon * epsilon) : 0.0;
    mb.c_global = false;
  }
  return mb;
}

/// Power-2 constant of a finite intersection: the minimum of the members'.
inline double modulus_intersection(std::span<const double> constants) {
  if (constants.empty())
    throw Error(errc::invalid_parameter, "intersection of zero sets");
  double c = kInf;
  for (double v : constants) {
    if (v <= 0.0)
      throw Error(errc::invalid_parameter, "power-2 constants must be > 0");
    c = std::min(c, v);
  }
  return c;
}

// --- concrete set kinds -----------------------------------------------------

/// phi(x) = x'Ax/2 + b'x + c with A symmetric.
struct QuadraticFunction {
  Mat A;
  Vec b;
  double c = 0.0;

  int dimension() const { return static_cast<int>(b.size()); }
  double value(const Vec& x) const {
    return 0.5 * x.dot(A * x) + b.dot(x) + c;
  }
  Vec gradient(const Vec& x) const { return A * x + b; }

  bool symmetric(double tol = 1e-12) const {
    return (A - A.transpose()).cwiseAbs().maxCoeff() <=
           tol * (1.0 + A.cwiseAbs().maxCoeff());
  }
};

struct PNormBall {
  Vec center;
  double radius = 1.0;
  double p = 2.0;
};

struct BallIntersection {
  std::vector<Vec> centers;
  double radius = 1.0;
};

struct SublevelSet {
  QuadraticFunction phi;
  double alpha = 0.0;
  ThetaSpec theta;
  double lip_phi = 1.0;
};

namespace detail {

template <MembershipSet S>
Vec boundary_point_impl(const S& set, const Vec& base, const Vec& dir,
                        double band);

template <MembershipSet S>
double estimate_diameter_impl(const S& set, int dirs, std::uint64_t seed);

}  // namespace detail

/// A validated uniformly convex set.  Margins are measured in the ambient
/// norm (the ball's own p-norm; Euclidean for the other kinds) and are exact
/// distances to the complement for balls and intersections, conservative
/// lower bounds for sublevel sets.
class ConvexSetSpec {
 public:
  using Body = std::variant<PNormBall, BallIntersection, SublevelSet>;

  static ConvexSetSpec pnorm_ball(Vec center, double radius, double p = 2.0) {
    if (radius <= 0.0)
      throw Error(errc::invalid_parameter, "ball radius must be positive");
    if (p <= 1.0 || !std::isfinite(p))
      throw Error(errc::invalid_parameter, "ball exponent must be in (1,inf)");
    if (center.size() < 1)
      throw Error(errc::dimension_mismatch, "ball center is empty");
    ConvexSetSpec s;
    s.body_ = PNormBall{std::move(center), radius, p};
    s.finalize();
    return s;
  }

  static ConvexSetSpec ball_intersection(std::vector<Vec> centers,
                                         double radius) {
    if (radius <= 0.0)
      throw Error(errc::invalid_parameter, "ball radius must be positive");
    if (centers.empty())
      throw Error(errc::invalid_parameter, "intersection needs >= 1 ball");
    for (const Vec& c : centers)
      if (c.size() != centers.front().size())
        throw Error(errc::dimension_mismatch, "ball centers disagree on dim");
    ConvexSetSpec s;
    s.body_ = BallIntersection{std::move(centers), radius};
    s.finalize();
    return s;
  }

  static ConvexSetSpec sublevel(QuadraticFunction phi, double alpha,
                                ThetaSpec theta, double lip_phi) {
    if (!phi.symmetric())
      throw Error(errc::asymmetric_matrix, "sublevel quadratic form");
    Eigen::SelfAdjointEigenSolver<Mat> es(phi.A);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0.0)
      throw Error(errc::invalid_parameter,
                  "sublevel function must be strongly convex (A > 0)");
    Vec xstar = -phi.A.ldlt().solve(phi.b);
    const double phistar = phi.value(xstar);
    if (alpha <= phistar)
      throw Error(errc::invalid_parameter,
                  "sublevel threshold leaves empty interior");
    if (theta.kappa <= 0.0 || theta.power < 2.0)
      throw Error(errc::invalid_parameter, "theta must be kappa*s^q, q >= 2");
    if (theta.power == 2.0 && theta.kappa > 0.5 * lmin * (1.0 + 1e-12))
      throw Error(errc::invalid_parameter,
                  "theta overstates the convexity of phi (kappa > lmin/2)");
    // Smallest admissible Lipschitz constant: sup over the set of |grad phi|
    // equals sqrt(lmax * s) with s = 2 (alpha - phi*).
    const double s = 2.0 * (alpha - phistar);
    const double lip_needed = std::sqrt(lmax * s);
    if (lip_phi < lip_needed * (1.0 - 1e-12))
      throw Error(errc::invalid_parameter,
                  "lip_phi below sup |grad phi| = " +
                      std::to_string(lip_needed) + " on the set");
    ConvexSetSpec out;
    out.body_ = SublevelSet{std::move(phi), alpha, theta, lip_phi};
    out.finalize();
    return out;
  }

  const Body& body() const { return body_; }
  int dimension() const { return dim_; }
  double ambient_p() const { return ambient_p_; }
  double diameter() const { return diam_; }
  Vec interior_point() const { return interior_; }
  Box bounding_box() const { return bbox_; }

  /// Signed inward margin; see class comment for exactness guarantees.
  double margin(const Vec& x) const {
    if (x.size() != dim_)
      throw Error(errc::dimension_mismatch, "point dim != set dim");
    if (const auto* b = std::get_if<PNormBall>(&body_))
      return b->radius - p_norm(x - b->center, b->p);
    if (const auto* bi = std::get_if<BallIntersection>(&body_)) {
      double m = kInf;
      for (const Vec& c : bi->centers)
        m = std::min(m, bi->radius - (x - c).norm());
      return m;
    }
    const auto& sl = std::get<SublevelSet>(body_);
    return (sl.alpha - sl.phi.value(x)) / sl.lip_phi;
  }

  /// Power-2 convexity constant from the analytic catalogue, if one applies.
  std::optional<double> power2_constant() const {
    if (const auto* b = std::get_if<PNormBall>(&body_)) {
      if (b->p > 2.0) return std::nullopt;
      return (b->p - 1.0) / (8.0 * b->radius);
    }
    if (const auto* bi = std::get_if<BallIntersection>(&body_))
      return 1.0 / (8.0 * bi->radius);
    const auto& sl = std::get<SublevelSet>(body_);
    if (sl.theta.power != 2.0) return std::nullopt;
    return sl.theta.kappa / (4.0 * sl.lip_phi);
  }

  /// Quadratic q with q <= 0 on the active boundary piece nearest x and
  /// q = 0 exactly on it; used by solvers that need smooth boundary algebra.
  /// Unavailable for p-norm balls with p != 2.
  std::optional<QuadraticFunction> boundary_quadratic(const Vec& x) const {
    if (const auto* b = std::get_if<PNormBall>(&body_)) {
      if (b->p != 2.0) return std::nullopt;
      QuadraticFunction q;
      q.A = 2.0 * Mat::Identity(dim_, dim_);
      q.b = -2.0 * b->center;
      q.c = b->center.squaredNorm() - b->radius * b->radius;
      return q;
    }
    if (const auto* bi = std::get_if<BallIntersection>(&body_)) {
      int best = 0;
      double worst = kInf;
      for (int i = 0; i < static_cast<int>(bi->centers.size()); ++i) {
        double m = bi->radius - (x - bi->centers[i]).norm();
        if (m < worst) {
          worst = m;
          best = i;
        }
      }
      QuadraticFunction q;
      q.A = 2.0 * Mat::Identity(dim_, dim_);
      q.b = -2.0 * bi->centers[best];
      q.c = bi->centers[best].squaredNorm() - bi->radius * bi->radius;
      return q;
    }
    const auto& sl = std::get<SublevelSet>(body_);
    QuadraticFunction q = sl.phi;
    q.c -= sl.alpha;
    return q;
  }

 private:
  void finalize() {
    if (const auto* b = std::get_if<PNormBall>(&body_)) {
      dim_ = static_cast<int>(b->center.size());
      ambient_p_ = b->p;
      interior_ = b->center;
      diam_ = 2.0 * b->radius;
      bbox_ = Box{(b->center.array() - b->radius).matrix(),
                  (b->center.array() + b->radius).matrix()};
      return;
    }
    if (const auto* bi = std::get_if<BallIntersection>(&body_)) {
      dim_ = static_cast<int>(bi->centers.front().size());
      ambient_p_ = 2.0;
      Vec centroid = Vec::Zero(dim_);
      for (const Vec& c : bi->centers) centroid += c;
      centroid /= static_cast<double>(bi->centers.size());
      interior_ = centroid;
      if (margin(interior_) <= 0.0) {
        // Centroid may sit outside for >= 3 balls; chase the deepest point.
        interior_ = pattern_max([&](const Vec& z) { return margin(z); },
                                [](const Vec&) { return true; }, centroid,
                                bi->radius, 1e-12 * bi->radius);
        if (margin(interior_) <= 0.0)
          throw Error(errc::invalid_parameter,
                      "ball intersection has empty interior");
      }
      Vec lo = (bi->centers.front().array() - bi->radius).matrix();
      Vec hi = (bi->centers.front().array() + bi->radius).matrix();
      for (const Vec& c : bi->centers) {
        lo = lo.cwiseMax((c.array() - bi->radius).matrix());
        hi = hi.cwiseMin((c.array() + bi->radius).matrix());
      }
      bbox_ = Box{lo, hi};
      if (bi->centers.size() == 1) {
        diam_ = 2.0 * bi->radius;
      } else if (bi->centers.size() == 2) {
        // Lens of two balls: the extreme pair is the rim of the
        // intersection circle.
        double d = (bi->centers[0] - bi->centers[1]).norm();
        diam_ = 2.0 * std::sqrt(std::max(
                          0.0, bi->radius * bi->radius - 0.25 * d * d));
      } else {
        diam_ = detail::estimate_diameter_impl(*this, 256, 2026);
      }
      return;
    }
    const auto& sl = std::get<SublevelSet>(body_);
    dim_ = sl.phi.dimension();
    ambient_p_ = 2.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(sl.phi.A);
    Vec xstar = -sl.phi.A.ldlt().solve(sl.phi.b);
    interior_ = xstar;
    const double s = 2.0 * (sl.alpha - sl.phi.value(xstar));
    diam_ = 2.0 * std::sqrt(s / es.eigenvalues().minCoeff());
    // Ellipsoid (x - x*)'A(x - x*) <= s: coordinate extent is
    // sqrt(s * (A^-1)_jj).
    Mat Ainv = sl.phi.A.ldlt().solve(Mat::Identity(dim_, dim_));
    Vec half(dim_);
    for (int j = 0; j < dim_; ++j) half[j] = std::sqrt(s * Ainv(j, j));
    bbox_ = Box{xstar - half, xstar + half};
  }

  Body body_{PNormBall{}};
  int dim_ = 0;
  double ambient_p_ = 2.0;
  double diam_ = 0.0;
  Vec interior_;
  Box bbox_;
};

// --- membership, sampling, boundary access ----------------------------------

struct Containment {
  bool inside = false;
  double margin = 0.0;
};

template <MembershipSet S>
Containment contains(const S& set, const Vec& x) {
  double m = set.margin(x);
  return Containment{m >= 0.0, m};
}

/// Deterministic low-discrepancy sample of the set via rejection in its
/// bounding box.  Throws if acceptance stays below ~1.5% of the budget.
template <MembershipSet S>
std::vector<Vec> sample_points(const S& set, int count, std::uint64_t seed) {
  if (count <= 0) return {};
  const Box bb = set.bounding_box();
  const int n = set.dimension();
  std::vector<Vec> out;
  out.reserve(count);
  const std::uint64_t offset = (seed * 0x9E3779B97F4A7C15ull) >> 34;
  const std::uint64_t budget =
      64ull * static_cast<std::uint64_t>(count) + 4096ull;
  for (std::uint64_t k = 0; k < budget && out.size() < size_t(count); ++k) {
    Vec x = bb.map01(halton_point(offset + k, n));
    if (set.margin(x) >= 0.0) out.push_back(std::move(x));
  }
  if (out.size() < size_t(count))
    throw Error(errc::unsupported,
                "set volume too small for rejection sampling");
  return out;
}

namespace detail {

template <MembershipSet S>
Vec boundary_point_impl(const S& set, const Vec& base, const Vec& dir,
                        double band) {
  if (set.margin(base) <= 0.0)
    throw Error(errc::invalid_parameter, "boundary cast needs interior base");
  double tlo = 0.0, thi = set.bounding_box().diag() + 1.0;
  if (set.margin(base + thi * dir) >= 0.0)
    throw Error(errc::invalid_parameter, "ray never leaves the set");
  for (int i = 0; i < 200; ++i) {
    double tm = 0.5 * (tlo + thi);
    double m = set.margin(base + tm * dir);
    (m >= 0.0 ? tlo : thi) = tm;
    if (m >= 0.0 && m <= band) break;
  }
  return base + tlo * dir;
}

template <MembershipSet S>
double estimate_diameter_impl(const S& set, int dirs, std::uint64_t seed) {
  const int n = set.dimension();
  const Vec z0 = set.interior_point();
  std::vector<Vec> pts;
  for (const Vec& u : sphere_grid(n, dirs, seed))
    pts.push_back(boundary_point_impl(set, z0, u, 1e-12));
  double best = 0.0;
  Vec a, b;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      double d = (pts[i] - pts[j]).norm();
      if (d > best) {
        best = d;
        a = pts[i];
        b = pts[j];
      }
    }
  if (best == 0.0) return 0.0;
  // Polish the extreme pair inside the feasibility mask.
  Vec xab(2 * n);
  xab << a, b;
  xab = pattern_max(
      [&](const Vec& z) { return (z.head(n) - z.tail(n)).norm(); },
      [&](const Vec& z) {
        return set.margin(z.head(n)) >= 0.0 && set.margin(z.tail(n)) >= 0.0;
      },
      xab, 0.05 * best, 1e-11 * best);
  return (xab.head(n) - xab.tail(n)).norm();
}

}  // namespace detail

/// Walk from an interior base along `dir` to a point inside the set whose
/// margin is at most `band` (a near-boundary point).
template <MembershipSet S>
Vec boundary_point(const S& set, const Vec& base, const Vec& dir,
                   double band) {
  return detail::boundary_point_impl(set, base, dir, band);
}

template <MembershipSet S>
double estimate_diameter(const S& set, int dirs = 256,
                         std::uint64_t seed = 2026) {
  return detail::estimate_diameter_impl(set, dirs, seed);
}

// --- sampled modulus of convexity -------------------------------------------

namespace detail {

inline Vec normalize_p(const Vec& v, double p) {
  double n = p_norm(v, p);
  if (n < 1e-300)
    throw Error(errc::invalid_parameter, "cannot normalise zero direction");
  return v / n;
}

/// Shrink the worst chord found by sampling: coordinate moves on the anchor
/// endpoint and tangent rotations of the chord direction, keeping the chord
/// length exact and both endpoints inside the set.
template <MembershipSet S>
double polish_worst_chord(const S& set, double eps, Vec x1, Vec u) {
  const double p = set.ambient_p();
  const int n = set.dimension();
  auto mid_margin = [&](const Vec& a, const Vec& dir) {
    return set.margin(a + (0.5 * eps) * dir);
  };
  auto feasible = [&](const Vec& a, const Vec& dir) {
    return set.margin(a) >= 0.0 && set.margin(a + eps * dir) >= 0.0;
  };
  double best = mid_margin(x1, u);
  double step = 0.05 * set.diameter();
  double astep = 0.3;
  for (int it = 0; it < 240 && (step > 1e-12 || astep > 1e-12); ++it) {
    bool improved = false;
    for (int i = 0; i < n; ++i) {
      for (double s : {step, -step}) {
        Vec cand = x1;
        cand[i] += s;
        if (!feasible(cand, u)) continue;
        double m = mid_margin(cand, u);
        if (m < best - 1e-17) {
          x1 = cand;
          best = m;
          improved = true;
        }
      }
    }
    const Mat tb = tangent_basis(Vec(u / u.norm()));
    for (int j = 0; j < tb.cols(); ++j) {
      for (double s : {astep, -astep}) {
        Vec cand;
        try {
          cand = normalize_p(Vec(u + s * tb.col(j)), p);
        } catch (const Error&) {
          continue;
        }
        if (!feasible(x1, cand)) continue;
        double m = mid_margin(x1, cand);
        if (m < best - 1e-17) {
          u = cand;
          best = m;
          improved = true;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      astep *= 0.5;
    }
  }
  return best;
}

}  // namespace detail

/// Sampled lower envelope of the modulus: minimum midpoint margin over
/// member chords of exact length epsilon (ambient norm).  Chords are biased
/// toward the boundary, where the minimum lives, and the worst pair found is
/// polished by local search.  With exact margins the estimate can only
/// overshoot the true modulus, never undershoot it.
template <MembershipSet S>
ModulusBound empirical_modulus(const S& set, double epsilon, int samples,
                               std::uint64_t seed) {
  const double diam = set.diameter();
  if (epsilon <= 0.0 || epsilon > diam * (1.0 + 1e-12))
    throw Error(errc::invalid_parameter,
                "chord length must lie in (0, diam]");
  if (samples < 16)
    throw Error(errc::invalid_parameter, "need at least 16 chord samples");
  const int n = set.dimension();
  const double p = set.ambient_p();
  const Vec z0 = set.interior_point();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double worst = kInf;
  Vec worst_x1, worst_u;
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = 64ull * static_cast<std::uint64_t>(samples);
  int found = 0;
  while (found < samples && attempts < max_attempts) {
    ++attempts;
    Vec x1;
    if (unif(rng) < 0.5) {
      // Boundary-biased anchor: s = U^(1/8) pushes mass to the boundary.
      Vec xb = boundary_point(set, z0, unit_dir(n, rng), 1e-9 * diam);
      double s = std::pow(unif(rng), 0.125);
      x1 = z0 + s * (xb - z0);
    } else {
      Box bb = set.bounding_box();
      Vec u01(n);
      for (int i = 0; i < n; ++i) u01[i] = unif(rng);
      x1 = bb.map01(u01);
      if (set.margin(x1) < 0.0) continue;
    }
    Vec u = detail::normalize_p(unit_dir(n, rng), p);
    if (set.margin(x1 + epsilon * u) < 0.0) {
      u = -u;
      if (set.margin(x1 + epsilon * u) < 0.0) continue;
    }
    double m = set.margin(x1 + (0.5 * epsilon) * u);
    if (m < worst) {
      worst = m;
      worst_x1 = x1;
      worst_u = u;
    }
    ++found;
  }
  if (found < samples)
    throw Error(errc::unsupported, "could not place enough member chords");
  worst = std::min(worst,
                   detail::polish_worst_chord(set, epsilon, worst_x1, worst_u));
  worst = std::max(worst, 0.0);

  ModulusBound mb;
  mb.epsilon = epsilon;
  mb.delta = worst;
  mb.c = worst / (epsilon * epsilon);
  mb.diam = diam;
  mb.c_global = false;
  return mb;
}

// --- extreme point check ------------------------------------------------

/// Sampled strict-convexity check: casts `samples` near-boundary points and
/// hunts for a chord of length 2*tol*diam centred (to within a tol^2 band)
/// on each.  Returns true when no such chord exists, i.e. every tested
/// boundary point is extreme at resolution tol.  Flat boundary pieces of
/// extent >= tol*diam produce witnesses and yield false.
template <MembershipSet S>
bool extremality_check(const S& set, int samples, double tol,
                       std::uint64_t seed) {
  if (tol <= 0.0 || tol >= 0.5)
    throw Error(errc::invalid_parameter, "tol must lie in (0, 0.5)");
  if (samples < 1)
    throw Error(errc::invalid_parameter, "need at least one boundary sample");
  const int n = set.dimension();
  const double D = set.diameter();
  const double t = tol * D;             // witness chord half-length
  const double band = t * t / (4.0 * D);  // admissible inward margin
  const Vec z0 = set.interior_point();

  auto chord_score = [&](const Vec& z, const Vec& u) {
    return std::min(set.margin(z + t * u), set.margin(z - t * u));
  };

  for (const Vec& cast : sphere_grid(n, samples, seed)) {
    Vec z = boundary_point(set, z0, cast, band);
    // Coarse direction scan, then rotate the best chord into alignment with
    // any flat piece.
    double best = -kInf;
    Vec ubest;
    for (const Vec& u : sphere_grid(n, 64, seed + 1)) {
      double sc = chord_score(z, u);
      if (sc > best) {
        best = sc;
        ubest = u;
      }
    }
    double astep = 0.4;
    while (astep > 1e-13) {
      bool improved = false;
      const Mat tb = tangent_basis(ubest);
      for (int j = 0; j < tb.cols(); ++j) {
        for (double s : {astep, -astep}) {
          Vec cand = ubest + s * tb.col(j);
          cand.normalize();
          double sc = chord_score(z, cand);
          if (sc > best + 1e-18) {
            best = sc;
            ubest = cand;
            improved = true;
          }
        }
      }
      if (!improved) astep *= 0.5;
    }
    if (best >= 0.0) return false;  // witness chord through z stays inside
  }
  return true;
}

}  // namespace uniconv::geometry
