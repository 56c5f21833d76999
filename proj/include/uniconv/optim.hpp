#pragma once

// Constrained nonconvex optimisation through the image space: global solves
// over uniformly convex sets, Lagrange multipliers from the normal cone of
// the target, duality gaps and saddle-point verification.  The solver stack
// is sampling + projection for globalisation and Newton on the active KKT
// system for the final digits (exact for quadratic data).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "uniconv/calculus.hpp"
#include "uniconv/cones.hpp"
#include "uniconv/errors.hpp"
#include "uniconv/geometry.hpp"
#include "uniconv/numeric.hpp"

namespace uniconv::optim {

// --- constraint targets ----------------------------------------------------

/// Right-hand side of the constraint g(x) in C: a singleton {v} or a
/// coordinate cone.
class TargetSpec {
 public:
  static TargetSpec singleton(Vec v) {
    TargetSpec t;
    t.body_ = std::move(v);
    return t;
  }

  static TargetSpec cone(ConeSpec c) {
    if (c.dim() < 1)
      throw Error(errc::invalid_parameter, "cone target of dimension zero");
    TargetSpec t;
    t.body_ = std::move(c);
    return t;
  }

  static TargetSpec zero(int k) { return singleton(Vec::Zero(k)); }

  bool is_cone() const { return std::holds_alternative<ConeSpec>(body_); }

  int dim() const {
    if (is_cone()) return std::get<ConeSpec>(body_).dim();
    return static_cast<int>(std::get<Vec>(body_).size());
  }

  const ConeSpec& cone_spec() const {
    if (!is_cone()) throw Error(errc::unsupported, "target is a singleton");
    return std::get<ConeSpec>(body_);
  }

  const Vec& point() const {
    if (is_cone()) throw Error(errc::unsupported, "target is a cone");
    return std::get<Vec>(body_);
  }

  Vec project(const Vec& y) const {
    if (y.size() != dim())
      throw Error(errc::dimension_mismatch, "target dim != vector dim");
    if (is_cone()) return std::get<ConeSpec>(body_).project(y);
    return std::get<Vec>(body_);
  }

  double distance(const Vec& y) const { return (y - project(y)).norm(); }

  bool feasible(const Vec& y, double tol) const { return distance(y) <= tol; }

  /// Componentwise structure of the normal cone N_C(y) at a feasible y,
  /// encoded as the set of admissible multiplier signs.
  ConeSpec normal_cone_at(const Vec& y, double act_tol) const {
    ConeSpec out;
    if (!is_cone()) {
      // N of a singleton is the whole space.
      out.rel.assign(static_cast<size_t>(dim()), ConeRel::free_dim);
      return out;
    }
    const ConeSpec& c = std::get<ConeSpec>(body_);
    out.rel.reserve(c.rel.size());
    for (int i = 0; i < c.dim(); ++i) {
      switch (c.rel[i]) {
        case ConeRel::eq0:
          out.rel.push_back(ConeRel::free_dim);
          break;
        case ConeRel::le0:
          out.rel.push_back(std::abs(y[i]) <= act_tol ? ConeRel::ge0
                                                      : ConeRel::eq0);
          break;
        case ConeRel::ge0:
          out.rel.push_back(std::abs(y[i]) <= act_tol ? ConeRel::le0
                                                      : ConeRel::eq0);
          break;
        case ConeRel::free_dim:
          out.rel.push_back(ConeRel::eq0);
          break;
      }
    }
    return out;
  }

  /// Polar cone C^- used by the dual problem.  Defined for cone targets and
  /// for the singleton {0}; other singletons must be translated away first.
  ConeSpec polar() const {
    if (is_cone()) return std::get<ConeSpec>(body_).polar();
    if (std::get<Vec>(body_).norm() != 0.0)
      throw Error(errc::unsupported,
                  "polar cone needs a cone target or the zero singleton");
    ConeSpec all_free;
    all_free.rel.assign(static_cast<size_t>(dim()), ConeRel::free_dim);
    return all_free;
  }

 private:
  std::variant<Vec, ConeSpec> body_{Vec()};
};

// --- problem -------------------------------------------------------------

struct ProblemSpec {
  calculus::SmoothMapSpec objective;   // scalar
  calculus::SmoothMapSpec constraint;  // into R^k
  geometry::ConvexSetSpec set;
  TargetSpec target;
  Vec x0;

  static ProblemSpec create(calculus::SmoothMapSpec objective,
                            calculus::SmoothMapSpec constraint,
                            geometry::ConvexSetSpec set, TargetSpec target,
                            Vec x0) {
    if (objective.output_dim() != 1)
      throw Error(errc::dimension_mismatch, "objective must be scalar");
    if (objective.input_dim() != constraint.input_dim())
      throw Error(errc::dimension_mismatch,
                  "objective and constraint input dims disagree");
    if (set.dimension() != objective.input_dim())
      throw Error(errc::dimension_mismatch, "set dim != input dim");
    if (target.dim() != constraint.output_dim())
      throw Error(errc::dimension_mismatch, "target dim != constraint dim");
    if (x0.size() != set.dimension())
      throw Error(errc::dimension_mismatch, "base point dim != set dim");
    return ProblemSpec{std::move(objective), std::move(constraint),
                       std::move(set), std::move(target), std::move(x0)};
  }

  int dim() const { return objective.input_dim(); }
  int constraint_dim() const { return constraint.output_dim(); }
};

inline double phi_value(const ProblemSpec& p, const Vec& x) {
  return eval_map(p.objective, x)[0];
}

inline Vec phi_gradient(const ProblemSpec& p, const Vec& x) {
  return jacobian(p.objective, x).row(0).transpose();
}

inline double lagrangian_eval(const ProblemSpec& p, const Vec& y,
                              const Vec& x) {
  if (y.size() != p.constraint_dim())
    throw Error(errc::dimension_mismatch, "multiplier dim != constraint dim");
  return phi_value(p, x) + y.dot(eval_map(p.constraint, x));
}

inline Vec lagrangian_gradient(const ProblemSpec& p, const Vec& y,
                               const Vec& x) {
  return phi_gradient(p, x) +
         jacobian(p.constraint, x).transpose() * y;
}

/// phi + <y, g> as a single quadratic when both maps are quadratic.
inline std::optional<geometry::QuadraticFunction> lagrangian_quadratic(
    const ProblemSpec& p, const Vec& y) {
  if (!p.objective.is_quadratic() || !p.constraint.is_quadratic())
    return std::nullopt;
  geometry::QuadraticFunction L = p.objective.components()[0];
  const auto& gs = p.constraint.components();
  for (int i = 0; i < p.constraint_dim(); ++i) {
    L.A += y[i] * gs[i].A;
    L.b += y[i] * gs[i].b;
    L.c += y[i] * gs[i].c;
  }
  return L;
}

// --- image space -------------------------------------------------------

/// The image-space reformulation around a base point: Phi(x) =
/// (phi(x) - phi(base), g(x) - v) with the singleton translated to zero, and
/// the forbidden cone Q = (-inf, 0) x C.  A feasible x improves on the base
/// point exactly when Phi(x) lands in Q.
struct ImageSpace {
  calculus::SmoothMapSpec map;
  ConeSpec q_cone;     // first component le0, then the target cone
  double phi_base = 0.0;
  Vec base;
};

inline ImageSpace build_image_map(const ProblemSpec& p, const Vec& base) {
  if (base.size() != p.dim())
    throw Error(errc::dimension_mismatch, "base point dim != problem dim");
  const double phi0 = phi_value(p, base);
  Vec shift = Vec::Zero(p.constraint_dim());
  ConeSpec q;
  q.rel.push_back(ConeRel::le0);
  if (p.target.is_cone()) {
    for (ConeRel r : p.target.cone_spec().rel) q.rel.push_back(r);
  } else {
    shift = p.target.point();
    for (int i = 0; i < p.constraint_dim(); ++i) q.rel.push_back(ConeRel::eq0);
  }

  calculus::SmoothMapSpec map = [&] {
    if (p.objective.is_quadratic() && p.constraint.is_quadratic()) {
      std::vector<geometry::QuadraticFunction> comps;
      comps.push_back(p.objective.components()[0]);
      comps.front().c -= phi0;
      for (int i = 0; i < p.constraint_dim(); ++i) {
        comps.push_back(p.constraint.components()[i]);
        comps.back().c -= shift[i];
      }
      return calculus::SmoothMapSpec::quadratic(std::move(comps));
    }
    auto obj = p.objective;
    auto con = p.constraint;
    return calculus::SmoothMapSpec::black_box(
        p.dim(), 1 + p.constraint_dim(), [obj, con, phi0, shift](const Vec& x) {
          Vec out(1 + con.output_dim());
          out[0] = eval_map(obj, x)[0] - phi0;
          out.tail(con.output_dim()) = eval_map(con, x) - shift;
          return out;
        });
  }();
  return ImageSpace{std::move(map), std::move(q), phi0, base};
}

inline ImageSpace build_image_map(const ProblemSpec& p) {
  return build_image_map(p, p.x0);
}

// --- solver internals ------------------------------------------------------

namespace detail {

template <geometry::MembershipSet S>
Vec pull_inside(const S& set, Vec z) {
  if (set.margin(z) >= 0.0) return z;
  const Vec a = set.interior_point();
  double lo = 0.0, hi = 1.0;  // z + t (a - z); t = 1 is strictly inside
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    (set.margin(z + mid * (a - z)) >= 0.0 ? hi : lo) = mid;
  }
  return z + hi * (a - z);
}

/// Gradient descent inside the set with boundary pullback and a tangential
/// slide when the raw step stalls against the boundary.
template <geometry::MembershipSet S, class F, class G>
Vec projected_descent(const S& set, F&& value, G&& grad, Vec x,
                      int iters = 400) {
  const double diam = set.diameter();
  x = pull_inside(set, std::move(x));
  double fx = value(x);
  double step = 0.05 * diam;
  const double h = 1e-6 * diam;
  while (iters-- > 0 && step > 1e-13 * diam) {
    Vec g = grad(x);
    double gn = g.norm();
    if (gn < 1e-16) break;
    Vec d = -g / gn;
    Vec cand = pull_inside(set, Vec(x + step * d));
    double fc = value(cand);
    if (fc < fx - 1e-16 * (1.0 + std::abs(fx))) {
      x = cand;
      fx = fc;
      step = std::min(step * 1.4, 0.1 * diam);
      continue;
    }
    if (set.margin(x) <= 16.0 * h) {
      // Inward normal by finite differences on the margin.
      Vec nrm(x.size());
      for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        nrm[i] = set.margin(xp) - set.margin(xm);
      }
      double nn = nrm.norm();
      if (nn > 1e-14) {
        nrm /= nn;
        Vec t = d - d.dot(nrm) * nrm;
        if (t.norm() > 1e-12) {
          cand = pull_inside(set, Vec(x + step * t.normalized()));
          fc = value(cand);
          if (fc < fx - 1e-16 * (1.0 + std::abs(fx))) {
            x = cand;
            fx = fc;
            continue;
          }
        }
      }
    }
    step *= 0.5;
  }
  return x;
}

/// Newton on the KKT system of: minimise a quadratic subject to quadratic
/// equalities.  Returns (x, lambda) when the residual collapses.
inline std::optional<std::pair<Vec, Vec>> kkt_newton(
    const geometry::QuadraticFunction& obj,
    const std::vector<geometry::QuadraticFunction>& eqs, Vec x,
    int iters = 60) {
  const int n = obj.dimension();
  const int ne = static_cast<int>(eqs.size());
  if (ne > n) return std::nullopt;
  Mat Je(ne, n);
  Vec e(ne);
  auto refresh = [&](const Vec& z) {
    for (int i = 0; i < ne; ++i) {
      e[i] = eqs[i].value(z);
      Je.row(i) = eqs[i].gradient(z).transpose();
    }
  };
  refresh(x);
  Vec lam = ne > 0 ? Vec(pinv_solve(Mat(Je.transpose()), Vec(-obj.gradient(x))))
                   : Vec(0);
  double res0 = kInf;
  for (int it = 0; it < iters; ++it) {
    refresh(x);
    Vec Fx = obj.gradient(x);
    for (int i = 0; i < ne; ++i) Fx += lam[i] * eqs[i].gradient(x);
    double res = std::hypot(Fx.norm(), e.norm());
    if (res <= 1e-12 * (1.0 + obj.gradient(x).norm())) {
      return std::make_pair(x, lam);
    }
    if (it > 8 && res > 0.9 * res0) return std::nullopt;  // stalling
    res0 = std::min(res0, res);
    Mat H = obj.A;
    for (int i = 0; i < ne; ++i) H += lam[i] * eqs[i].A;
    Mat K = Mat::Zero(n + ne, n + ne);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, ne) = Je.transpose();
    K.bottomLeftCorner(ne, n) = Je;
    Vec rhs(n + ne);
    rhs.head(n) = -Fx;
    if (ne > 0) rhs.tail(ne) = -e;
    Eigen::FullPivLU<Mat> lu(K);
    if (!lu.isInvertible()) return std::nullopt;
    Vec dz = lu.solve(rhs);
    x += dz.head(n);
    if (ne > 0) lam += dz.tail(ne);
  }
  refresh(x);
  Vec Fx = obj.gradient(x);
  for (int i = 0; i < ne; ++i) Fx += lam[i] * eqs[i].gradient(x);
  if (std::hypot(Fx.norm(), e.norm()) <= 1e-10 * (1.0 + obj.gradient(x).norm()))
    return std::make_pair(x, lam);
  return std::nullopt;
}

/// Global minimum of a smooth function over the set alone: low-discrepancy
/// pool, descent from the leaders, and an exact Newton finish when the
/// function is quadratic.  `seeds` are always evaluated and polished.
template <geometry::MembershipSet S, class F, class G>
std::pair<Vec, double> min_over_set(
    const S& set, F&& value, G&& grad,
    const std::optional<geometry::QuadraticFunction>& quad,
    std::span<const Vec> seeds, int samples, std::uint64_t seed) {
  std::vector<Vec> pool = geometry::sample_points(set, samples, seed);
  const Vec z0 = set.interior_point();
  for (const Vec& u : sphere_grid(set.dimension(), 32, seed + 3))
    pool.push_back(geometry::boundary_point(set, z0, u, 1e-9 * set.diameter()));
  for (const Vec& s : seeds) pool.push_back(pull_inside(set, s));

  std::vector<std::pair<double, const Vec*>> ranked;
  ranked.reserve(pool.size());
  for (const Vec& x : pool) ranked.emplace_back(value(x), &x);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  Vec best_x = *ranked.front().second;
  double best_v = ranked.front().first;
  const int starts =
      std::min<int>(6 + static_cast<int>(seeds.size()), ranked.size());
  for (int s = 0; s < starts; ++s) {
    Vec x = projected_descent(set, value, grad, *ranked[s].second);
    double v = value(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  if (quad) {
    // Interior candidate: unconstrained stationary point.
    Eigen::FullPivLU<Mat> lu(quad->A);
    if (lu.isInvertible()) {
      Vec xs = lu.solve(Vec(-quad->b));
      if (set.margin(xs) >= 0.0 && quad->value(xs) < best_v) {
        best_v = quad->value(xs);
        best_x = xs;
      }
    }
    // Boundary candidate: Newton on the active boundary piece.
    if (set.margin(best_x) <= 1e-3 * set.diameter()) {
      if (auto bq = set.boundary_quadratic(best_x)) {
        if (auto sol = kkt_newton(*quad, {*bq}, best_x)) {
          const Vec& xb = sol->first;
          if (set.margin(xb) >= -1e-9 * set.diameter() &&
              quad->value(xb) <= best_v + 1e-14 * (1.0 + std::abs(best_v))) {
            best_v = quad->value(xb);
            best_x = pull_inside(set, xb);
          }
        }
      }
    }
  }
  return {best_x, best_v};
}

/// Gauss-Newton projection onto {g in C} interleaved with set pullback.
inline std::optional<Vec> project_constraint(const ProblemSpec& p, Vec x,
                                             int iters = 80) {
  const double diam = p.set.diameter();
  double scale = 1.0;
  for (int it = 0; it < iters; ++it) {
    x = pull_inside(p.set, std::move(x));
    Vec gv = eval_map(p.constraint, x);
    scale = 1.0 + gv.norm();
    Vec r = gv - p.target.project(gv);
    if (r.norm() <= 1e-12 * scale && p.set.margin(x) >= 0.0) return x;
    Vec dx = pinv_solve(jacobian(p.constraint, x), r);
    double alpha = 1.0;
    bool moved = false;
    while (alpha >= 1e-4) {
      Vec cand = pull_inside(p.set, Vec(x - alpha * dx));
      Vec gc = eval_map(p.constraint, cand);
      if (p.target.distance(gc) < r.norm() * (1.0 - 1e-4 * alpha)) {
        x = cand;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  Vec gv = eval_map(p.constraint, x);
  if (p.target.distance(gv) <= 1e-10 * (1.0 + gv.norm()) &&
      p.set.margin(x) >= -1e-12 * diam)
    return pull_inside(p.set, std::move(x));
  return std::nullopt;
}

/// Active constraint components at x (always all of a singleton target).
inline std::vector<int> active_components(const ProblemSpec& p, const Vec& x,
                                          double act_tol) {
  std::vector<int> act;
  const Vec gv = eval_map(p.constraint, x);
  if (!p.target.is_cone()) {
    for (int i = 0; i < p.constraint_dim(); ++i) act.push_back(i);
    return act;
  }
  const ConeSpec& c = p.target.cone_spec();
  for (int i = 0; i < c.dim(); ++i) {
    if (c.rel[i] == ConeRel::eq0 ||
        (c.rel[i] != ConeRel::free_dim && std::abs(gv[i]) <= act_tol))
      act.push_back(i);
  }
  return act;
}

/// Equality systems for the KKT finish: active constraint components
/// (translated by the singleton target) and optionally the set boundary.
inline std::vector<geometry::QuadraticFunction> active_equalities(
    const ProblemSpec& p, const Vec& x, const std::vector<int>& comps,
    bool set_active) {
  std::vector<geometry::QuadraticFunction> eqs;
  const auto& gs = p.constraint.components();
  for (int i : comps) {
    geometry::QuadraticFunction q = gs[i];
    if (!p.target.is_cone()) q.c -= p.target.point()[i];
    eqs.push_back(std::move(q));
  }
  if (set_active) {
    auto bq = p.set.boundary_quadratic(x);
    if (bq) eqs.push_back(*bq);
  }
  return eqs;
}

/// Feasible descent for phi on {x in S : g(x) in C}: tangent steps with
/// Gauss-Newton retraction.
inline Vec constrained_descent(const ProblemSpec& p, Vec x, int iters = 200) {
  const double diam = p.set.diameter();
  double fx = phi_value(p, x);
  double step = 0.02 * diam;
  while (iters-- > 0 && step > 1e-12 * diam) {
    auto comps = active_components(p, x, 1e-7 * (1.0 + diam));
    Vec d = -phi_gradient(p, x);
    if (!comps.empty()) {
      Mat Ja(static_cast<int>(comps.size()), p.dim());
      Mat Jg = jacobian(p.constraint, x);
      for (std::size_t i = 0; i < comps.size(); ++i) Ja.row(i) = Jg.row(comps[i]);
      // Remove the row-space part: the minimal-norm solution of Ja w = Ja d
      // is exactly the projection of d onto the active normal directions.
      d -= pinv_solve(Ja, Vec(Ja * d));
    }
    double dn = d.norm();
    if (dn < 1e-16) break;
    d /= dn;
    auto cand = project_constraint(p, Vec(x + step * d), 30);
    if (cand && phi_value(p, *cand) < fx - 1e-16 * (1.0 + std::abs(fx))) {
      x = *cand;
      fx = phi_value(p, *cand);
      step = std::min(step * 1.4, 0.05 * diam);
    } else {
      step *= 0.5;
    }
  }
  return x;
}

/// Rewrites a nonzero singleton target as g - v in {0}: the feasible region
/// and the Lagrangian differences are unchanged, and the polar cone becomes
/// coordinate-wise.
inline ProblemSpec with_zero_singleton(const ProblemSpec& p) {
  if (p.target.is_cone() || p.target.point().norm() == 0.0) return p;
  ProblemSpec q = p;
  const Vec v = p.target.point();
  if (p.constraint.is_quadratic()) {
    auto comps = p.constraint.components();
    for (int i = 0; i < p.constraint_dim(); ++i) comps[i].c -= v[i];
    q.constraint = calculus::SmoothMapSpec::quadratic(std::move(comps));
  } else {
    auto con = p.constraint;
    q.constraint = calculus::SmoothMapSpec::black_box(
        p.dim(), p.constraint_dim(),
        [con, v](const Vec& x) { return Vec(eval_map(con, x) - v); });
  }
  q.target = TargetSpec::zero(p.constraint_dim());
  return q;
}

}  // namespace detail

// --- global solve ----------------------------------------------------------

struct SolveOptions {
  double tol = 1e-6;
  int samples = 4096;
  int polish_starts = 12;
  std::uint64_t seed = 2026;
};

struct SolveResult {
  Vec x;
  double value = kNaN;
  double boundary_margin = kNaN;   // margin of x in S
  double constraint_dist = kNaN;   // distance of g(x) from the target
  int feasible_candidates = 0;
};

/// Globalised solve of min phi over {x in S : g(x) in C}: project a
/// low-discrepancy pool onto the feasible region, descend from the leaders
/// along the constraint manifold, and finish with Newton on the active KKT
/// system (exact for quadratic data).  Throws errc::infeasible when no
/// feasible point is found.
inline SolveResult global_solve(const ProblemSpec& p,
                                const SolveOptions& opts = {}) {
  const double diam = p.set.diameter();
  std::vector<Vec> pool = geometry::sample_points(p.set, opts.samples, opts.seed);
  const Vec z0 = p.set.interior_point();
  for (const Vec& u : sphere_grid(p.dim(), 128, opts.seed + 1))
    pool.push_back(geometry::boundary_point(p.set, z0, u, 1e-9 * diam));
  if (p.set.margin(p.x0) >= 0.0) pool.push_back(p.x0);

  std::vector<Vec> feas;
  feas.reserve(pool.size() / 4);
  for (const Vec& x : pool) {
    if (auto pr = detail::project_constraint(p, x)) feas.push_back(*pr);
    if (feas.size() >= 4096) break;
  }
  if (feas.empty()) {
    // One retry with a denser pool before declaring infeasibility.
    for (const Vec& x :
         geometry::sample_points(p.set, 4 * opts.samples, opts.seed + 17)) {
      if (auto pr = detail::project_constraint(p, x)) feas.push_back(*pr);
      if (!feas.empty()) break;
    }
  }
  if (feas.empty())
    throw Error(errc::infeasible, "no feasible point in S found");

  std::sort(feas.begin(), feas.end(), [&](const Vec& a, const Vec& b) {
    return phi_value(p, a) < phi_value(p, b);
  });
  // Deduplicate leaders so the polish starts explore distinct basins.
  std::vector<Vec> starts;
  for (const Vec& x : feas) {
    bool fresh = true;
    for (const Vec& s : starts)
      if ((x - s).norm() < 1e-3 * diam) {
        fresh = false;
        break;
      }
    if (fresh) starts.push_back(x);
    if (static_cast<int>(starts.size()) >= opts.polish_starts) break;
  }

  Vec best = starts.front();
  double best_v = phi_value(p, best);
  const bool quadratic_data =
      p.objective.is_quadratic() && p.constraint.is_quadratic();
  for (const Vec& s : starts) {
    Vec x = detail::constrained_descent(p, s);
    double v = phi_value(p, x);
    if (quadratic_data) {
      // Newton finish on the active KKT system; fall back to the descent
      // point if the polished point is worse or infeasible.
      const double act_tol = 1e-5 * (1.0 + diam);
      auto comps = detail::active_components(p, x, act_tol);
      const bool set_active = p.set.margin(x) <= act_tol;
      for (int drop_set = 0; drop_set < (set_active ? 2 : 1); ++drop_set) {
        auto eqs =
            detail::active_equalities(p, x, comps, set_active && drop_set == 0);
        auto sol = detail::kkt_newton(p.objective.components()[0], eqs, x);
        if (!sol) continue;
        Vec xb = sol->first;
        Vec gv = eval_map(p.constraint, xb);
        if (p.set.margin(xb) < -1e-9 * diam) continue;
        if (p.target.distance(gv) > 1e-9 * (1.0 + gv.norm())) continue;
        double vb = phi_value(p, xb);
        if (vb <= v + 1e-12 * (1.0 + std::abs(v))) {
          x = xb;
          v = vb;
          break;
        }
      }
    }
    if (v < best_v) {
      best_v = v;
      best = x;
    }
  }

  SolveResult res;
  res.x = best;
  res.value = best_v;
  res.boundary_margin = p.set.margin(best);
  res.constraint_dist = p.target.distance(eval_map(p.constraint, best));
  res.feasible_candidates = static_cast<int>(feas.size());
  return res;
}

// --- multipliers -----------------------------------------------------------

struct MultiplierOptions {
  double tol = 1e-6;
  int grid = 33;              // coarse points per multiplier dimension
  double box0 = 1.0;          // initial search box half-width
  double box_cap = 65536.0;   // expansion limit (2^16)
  int inner_samples = 1024;   // set samples per Lagrangian minimisation
  std::uint64_t seed = 2026;
};

struct MultiplierResult {
  Vec y;
  double residual = -kInf;  // min_S L(y, .) - L(y, xbar)
  bool found = false;
  bool cap_exhausted = false;
};

namespace detail {

struct ConeBox {
  const ConeSpec* domain;
  double B;

  double lo(int i) const {
    switch (domain->rel[i]) {
      case ConeRel::eq0: return 0.0;
      case ConeRel::le0: return -B;
      case ConeRel::ge0: return 0.0;
      case ConeRel::free_dim: return -B;
    }
    return 0.0;
  }
  double hi(int i) const {
    switch (domain->rel[i]) {
      case ConeRel::eq0: return 0.0;
      case ConeRel::le0: return 0.0;
      case ConeRel::ge0: return B;
      case ConeRel::free_dim: return B;
    }
    return 0.0;
  }
};

/// Maximise a concave function over the cone-constrained box by coarse grid
/// plus cyclic coordinate golden-section refinement.
template <class F>
std::pair<Vec, double> maximize_over_cone_box(F&& fn, const ConeSpec& domain,
                                              double B, int grid) {
  const int k = domain.dim();
  ConeBox box{&domain, B};
  std::vector<int> live;
  for (int i = 0; i < k; ++i)
    if (domain.rel[i] != ConeRel::eq0) live.push_back(i);

  Vec y = Vec::Zero(k);
  double best = fn(y);
  if (live.empty()) return {y, best};

  if (live.size() <= 2) {
    // Full tensor grid on the live coordinates.
    const int g = grid;
    std::vector<int> idx(live.size(), 0);
    for (;;) {
      Vec cand = Vec::Zero(k);
      for (std::size_t d = 0; d < live.size(); ++d) {
        int i = live[d];
        cand[i] = box.lo(i) + (box.hi(i) - box.lo(i)) * idx[d] / (g - 1);
      }
      double v = fn(cand);
      if (v > best) {
        best = v;
        y = cand;
      }
      std::size_t d = 0;
      while (d < idx.size() && ++idx[d] == g) idx[d++] = 0;
      if (d == idx.size()) break;
    }
  }
  // Cyclic golden refinement (valid per coordinate by concavity).
  for (int round = 0; round < 4; ++round) {
    for (int i : live) {
      Vec cand = y;
      double t = golden_max(
          [&](double v) {
            cand[i] = v;
            return fn(cand);
          },
          box.lo(i), box.hi(i), 70);
      cand[i] = t;
      double v = fn(cand);
      if (v > best) {
        best = v;
        y = cand;
      }
    }
  }
  return {y, best};
}

}  // namespace detail

/// Searches N_C(g(xbar)) for a multiplier whose Lagrangian is globally
/// minimised over S at xbar, expanding the search box geometrically up to
/// the cap.  The residual min_S L(y,.) - L(y, xbar) is >= -tol at success.
inline MultiplierResult find_multiplier(const ProblemSpec& p, const Vec& xbar,
                                        const MultiplierOptions& opts = {}) {
  if (xbar.size() != p.dim())
    throw Error(errc::dimension_mismatch, "candidate dim != problem dim");
  const Vec gbar = eval_map(p.constraint, xbar);
  const ConeSpec domain =
      p.target.normal_cone_at(gbar, 1e-6 * (1.0 + gbar.norm()));
  int live = 0;
  for (ConeRel r : domain.rel)
    if (r != ConeRel::eq0) ++live;
  if (live > 2)
    throw Error(errc::unsupported,
                "multiplier search supports at most two active components");

  const Vec seeds[] = {xbar};
  auto residual = [&](const Vec& y) {
    auto quad = lagrangian_quadratic(p, y);
    auto [xmin, vmin] = detail::min_over_set(
        p.set, [&](const Vec& x) { return lagrangian_eval(p, y, x); },
        [&](const Vec& x) { return lagrangian_gradient(p, y, x); }, quad,
        seeds, opts.inner_samples, opts.seed);
    return vmin - lagrangian_eval(p, y, xbar);
  };

  MultiplierResult out;
  double B = opts.box0;
  for (;;) {
    auto [y, val] = detail::maximize_over_cone_box(residual, domain, B,
                                                   opts.grid);
    if (val > out.residual) {
      out.residual = val;
      out.y = y;
    }
    if (out.residual >= -opts.tol) {
      out.found = true;
      return out;
    }
    const bool at_edge = y.lpNorm<Eigen::Infinity>() >= 0.9 * B;
    if (!at_edge) return out;  // concave maximum is interior: no better y
    if (B >= opts.box_cap) {
      out.cap_exhausted = true;
      return out;
    }
    B *= 2.0;
  }
}

// --- duality gap ------------------------------------------------------

struct GapOptions {
  int grid = 33;
  double box0 = 1.0;
  double box_cap = 65536.0;
  int inner_samples = 1024;
  std::uint64_t seed = 2026;
};

struct GapResult {
  double primal = kNaN;
  double dual = kNaN;
  double gap = kNaN;
  bool truncated = false;  // box expansion hit the cap while still improving
  Vec y;
};

/// Duality gap between min phi over the feasible region and the sup over the
/// polar cone of the dual function d(y) = min_S L(y, .).  The inner
/// minimisation always evaluates the primal solution, which pins the
/// numerical dual below the primal value (weak duality holds by
/// construction).
inline GapResult duality_gap(const ProblemSpec& p, const SolveResult& primal,
                             const GapOptions& opts = {}) {
  const ProblemSpec q = detail::with_zero_singleton(p);
  const ConeSpec polar = q.target.polar();
  int live = 0;
  for (ConeRel r : polar.rel)
    if (r != ConeRel::eq0) ++live;
  if (live > 2)
    throw Error(errc::unsupported,
                "dual search supports at most two live components");

  const Vec seeds[] = {primal.x};
  auto dual_fn = [&](const Vec& y) {
    auto quad = lagrangian_quadratic(q, y);
    auto [xmin, vmin] = detail::min_over_set(
        q.set, [&](const Vec& x) { return lagrangian_eval(q, y, x); },
        [&](const Vec& x) { return lagrangian_gradient(q, y, x); }, quad,
        seeds, opts.inner_samples, opts.seed);
    return vmin;
  };

  GapResult res;
  res.primal = primal.value;
  res.dual = -kInf;
  double B = opts.box0;
  for (;;) {
    auto [y, val] = detail::maximize_over_cone_box(dual_fn, polar, B,
                                                   opts.grid);
    bool improved = val > res.dual + 1e-14 * (1.0 + std::abs(val));
    if (improved) {
      res.dual = val;
      res.y = y;
    }
    const bool at_edge = y.lpNorm<Eigen::Infinity>() >= 0.9 * B;
    if (!at_edge || !improved) break;
    if (B >= opts.box_cap) {
      res.truncated = true;
      break;
    }
    B *= 2.0;
  }
  res.gap = res.primal - res.dual;
  return res;
}

// --- saddle point and interior checks -----------------------------------

struct SaddleResult {
  bool ok = false;
  double worst_left = 0.0;   // max over y in C^- of L(y, xbar) - L(y*, xbar)
  double worst_right = 0.0;  // L(y*, xbar) - min_S L(y*, .)
};

/// Verifies L(y, xbar) <= L(y*, xbar) <= L(y*, x) within tol: the left side
/// over sampled polar-cone multipliers, the right by global minimisation.
inline SaddleResult saddle_check(const ProblemSpec& p, const Vec& xbar,
                                 const Vec& ystar, int samples, double tol,
                                 std::uint64_t seed = 2026) {
  if (samples < 8)
    throw Error(errc::invalid_parameter, "need >= 8 saddle samples");
  const ProblemSpec q = detail::with_zero_singleton(p);
  const Vec& ys = ystar;
  const ConeSpec polar = q.target.polar();
  const double base = lagrangian_eval(q, ys, xbar);

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double B = 2.0 * ys.norm() + 1.0;
  SaddleResult res;
  for (int k = 0; k < samples; ++k) {
    Vec y(p.constraint_dim());
    for (int i = 0; i < y.size(); ++i) {
      switch (polar.rel[i]) {
        case ConeRel::eq0: y[i] = 0.0; break;
        case ConeRel::le0: y[i] = -B * unif(rng); break;
        case ConeRel::ge0: y[i] = B * unif(rng); break;
        case ConeRel::free_dim: y[i] = B * (2.0 * unif(rng) - 1.0); break;
      }
    }
    res.worst_left =
        std::max(res.worst_left, lagrangian_eval(q, y, xbar) - base);
  }

  const Vec seeds[] = {xbar};
  auto quad = lagrangian_quadratic(q, ys);
  auto [xmin, vmin] = detail::min_over_set(
      q.set, [&](const Vec& x) { return lagrangian_eval(q, ys, x); },
      [&](const Vec& x) { return lagrangian_gradient(q, ys, x); }, quad,
      seeds, 2048, seed + 1);
  res.worst_right = base - vmin;
  res.ok = res.worst_left <= tol && res.worst_right <= tol;
  return res;
}

struct InteriorCheckResult {
  bool ran = false;
  bool ok = false;
  std::string skip_reason;
};

/// Noncovering lemma check: when x0 lies in the interior of S, is feasible,
/// and the image map is open at x0, every ball around x0 must contain a
/// strictly better feasible point.
inline InteriorCheckResult interior_nonoptimality_check(
    const ProblemSpec& p, std::span<const double> radii,
    const SolveOptions& opts = {}) {
  InteriorCheckResult res;
  const double m0 = p.set.margin(p.x0);
  if (m0 <= 0.0) {
    res.skip_reason = "x0 is not an interior point of S";
    return res;
  }
  const Vec g0 = eval_map(p.constraint, p.x0);
  if (p.target.distance(g0) > 1e-9 * (1.0 + g0.norm())) {
    res.skip_reason = "x0 is not feasible";
    return res;
  }
  auto isa = build_image_map(p);
  auto reg = calculus::reg_bound(isa.map, p.x0);
  if (!reg.surjective) {
    res.skip_reason = "image map derivative is not surjective at x0";
    return res;
  }
  res.ran = true;
  res.ok = true;

  const double phi0 = phi_value(p, p.x0);
  const double strict = 1e-10 * (1.0 + std::abs(phi0));
  Mat Jg = jacobian(p.constraint, p.x0);
  auto comps = detail::active_components(p, p.x0, 1e-9 * (1.0 + g0.norm()));
  Mat Ja(static_cast<int>(comps.size()), p.dim());
  for (std::size_t i = 0; i < comps.size(); ++i) Ja.row(i) = Jg.row(comps[i]);
  // Tangent basis of the active constraints at x0.
  Mat V = Ja.rows() > 0
              ? Mat(Ja.jacobiSvd(Eigen::ComputeFullV).matrixV().rightCols(
                    p.dim() - Ja.rows()))
              : Mat(Mat::Identity(p.dim(), p.dim()));

  for (double r : radii) {
    if (r <= 0.0)
      throw Error(errc::invalid_parameter, "radii must be positive");
    const double re = std::min(r, m0);
    bool found = false;
    std::vector<Vec> dirs;
    for (int j = 0; j < V.cols(); ++j) {
      dirs.push_back(V.col(j));
      dirs.push_back(-V.col(j));
    }
    for (const Vec& d : dirs) {
      for (double tau = re; tau >= re / 64.0 && !found; tau *= 0.5) {
        auto cand = detail::project_constraint(p, Vec(p.x0 + tau * d), 40);
        if (!cand) continue;
        if ((*cand - p.x0).norm() > re) continue;
        if (phi_value(p, *cand) < phi0 - strict) found = true;
      }
      if (found) break;
    }
    if (!found) {
      // Fallback: project a small feasible cloud around x0.
      for (int k = 0; k < 64 && !found; ++k) {
        Vec z = p.x0 +
                re * (2.0 * halton_point(k + 1, p.dim()) - Vec::Ones(p.dim()));
        auto cand = detail::project_constraint(p, z, 40);
        if (!cand || (*cand - p.x0).norm() > re) continue;
        if (phi_value(p, *cand) < phi0 - strict) found = true;
      }
    }
    if (!found) res.ok = false;
  }
  return res;
}

}  // namespace uniconv::optim
