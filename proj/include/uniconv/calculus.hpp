#pragma once

// Smooth maps between Euclidean spaces and the quantitative calculus the
// convexity certificate consumes: Jacobians, Lipschitz constants of the
// derivative, metric regularity at a point, and second-order midpoint
// defects.

#include <functional>
#include <utility>
#include <vector>

#include "uniconv/errors.hpp"
#include "uniconv/geometry.hpp"
#include "uniconv/numeric.hpp"

namespace uniconv::calculus {

/// A C^1 map f: R^n -> R^m.  Quadratic maps carry their components and get
/// exact derivatives and exact derivative-Lipschitz constants; black boxes
/// fall back to finite differences and sampling.
class SmoothMapSpec {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacFn = std::function<Mat(const Vec&)>;

  static SmoothMapSpec quadratic(std::vector<geometry::QuadraticFunction> comps) {
    if (comps.empty())
      throw Error(errc::invalid_parameter, "map needs >= 1 component");
    const int n = comps.front().dimension();
    for (const auto& q : comps) {
      if (q.dimension() != n || q.A.rows() != n || q.A.cols() != n)
        throw Error(errc::dimension_mismatch, "component dims disagree");
      if (!q.symmetric())
        throw Error(errc::asymmetric_matrix, "quadratic map component");
    }
    SmoothMapSpec m;
    m.n_ = n;
    m.m_ = static_cast<int>(comps.size());
    m.comps_ = std::move(comps);
    return m;
  }

  static SmoothMapSpec affine(const Mat& M, const Vec& d) {
    if (M.rows() != d.size())
      throw Error(errc::dimension_mismatch, "affine offset dim != rows");
    std::vector<geometry::QuadraticFunction> comps(M.rows());
    for (int i = 0; i < M.rows(); ++i) {
      comps[i].A = Mat::Zero(M.cols(), M.cols());
      comps[i].b = M.row(i).transpose();
      comps[i].c = d[i];
    }
    return quadratic(std::move(comps));
  }

  static SmoothMapSpec black_box(int n, int m, EvalFn f, JacFn J = nullptr) {
    if (n < 1 || m < 1)
      throw Error(errc::invalid_parameter, "map dims must be positive");
    if (!f) throw Error(errc::invalid_parameter, "missing evaluation fn");
    SmoothMapSpec out;
    out.n_ = n;
    out.m_ = m;
    out.eval_ = std::move(f);
    out.jac_ = std::move(J);
    return out;
  }

  int input_dim() const { return n_; }
  int output_dim() const { return m_; }
  bool is_quadratic() const { return !comps_.empty(); }

  const std::vector<geometry::QuadraticFunction>& components() const {
    if (!is_quadratic())
      throw Error(errc::unsupported, "map has no quadratic components");
    return comps_;
  }

  friend Vec eval_map(const SmoothMapSpec& f, const Vec& x);
  friend Mat jacobian(const SmoothMapSpec& f, const Vec& x);

 private:
  int n_ = 0, m_ = 0;
  std::vector<geometry::QuadraticFunction> comps_;
  EvalFn eval_;
  JacFn jac_;
};

inline Vec eval_map(const SmoothMapSpec& f, const Vec& x) {
  if (x.size() != f.n_)
    throw Error(errc::dimension_mismatch, "point dim != map input dim");
  if (f.is_quadratic()) {
    Vec y(f.m_);
    for (int i = 0; i < f.m_; ++i) y[i] = f.comps_[i].value(x);
    return y;
  }
  Vec y = f.eval_(x);
  if (y.size() != f.m_)
    throw Error(errc::dimension_mismatch, "evaluation returned wrong dim");
  return y;
}

/// Exact for quadratic maps and user-supplied Jacobians; otherwise central
/// differences with step (machine eps)^(1/3) * max(1, |x|).
inline Mat jacobian(const SmoothMapSpec& f, const Vec& x) {
  if (x.size() != f.n_)
    throw Error(errc::dimension_mismatch, "point dim != map input dim");
  if (f.is_quadratic()) {
    Mat J(f.m_, f.n_);
    for (int i = 0; i < f.m_; ++i)
      J.row(i) = f.comps_[i].gradient(x).transpose();
    return J;
  }
  if (f.jac_) {
    Mat J = f.jac_(x);
    if (J.rows() != f.m_ || J.cols() != f.n_)
      throw Error(errc::dimension_mismatch, "jacobian fn returned wrong dims");
    return J;
  }
  const double h =
      std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, x.norm());
  Mat J(f.m_, f.n_);
  Vec xp = x, xm = x;
  for (int j = 0; j < f.n_; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    J.col(j) = (eval_map(f, xp) - eval_map(f, xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return J;
}

// --- Lipschitz constant of the derivative -----------------------------------

struct BallRegion {
  Vec center;
  double radius = 0.0;

  bool holds(const Vec& x) const {
    return (x - center).norm() <= radius * (1.0 + 1e-12) + 1e-15;
  }
};

struct LipschitzBound {
  enum class Method { exact_quadratic, sampled };

  double value = 0.0;
  BallRegion region;
  Method method = Method::sampled;
};

namespace detail {

/// For a quadratic map, Df(x) - Df(y) = H(x - y) where H(u) stacks the rows
/// (A_i u)'.  The derivative-Lipschitz constant is max_{|u|=1} |H(u)|_op,
/// exact and region independent.
inline double quadratic_lip(const SmoothMapSpec& f) {
  const auto& comps = f.components();
  const int n = f.input_dim();
  const int m = f.output_dim();
  auto sigma = [&](const Vec& u) {
    Mat H(m, n);
    for (int i = 0; i < m; ++i) H.row(i) = (comps[i].A * u).transpose();
    return operator_norm(H);
  };
  auto dirs = sphere_grid(n, n == 2 ? 4096 : 8192);
  std::vector<std::pair<double, Vec>> ranked;
  ranked.reserve(dirs.size());
  for (const Vec& u : dirs) ranked.emplace_back(sigma(u), u);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = ranked.front().first;
  const int starts = std::min<int>(6, static_cast<int>(ranked.size()));
  for (int s = 0; s < starts; ++s) {
    Vec u = ranked[s].second;
    double fu = ranked[s].first;
    double astep = 4.0 / std::sqrt(static_cast<double>(dirs.size()));
    while (astep > 1e-13) {
      bool improved = false;
      const Mat tb = tangent_basis(u);
      for (int j = 0; j < tb.cols(); ++j) {
        for (double sg : {astep, -astep}) {
          Vec cand = u + sg * tb.col(j);
          cand.normalize();
          double fc = sigma(cand);
          if (fc > fu + 1e-18) {
            fu = fc;
            u = cand;
            improved = true;
          }
        }
      }
      if (!improved) astep *= 0.5;
    }
    best = std::max(best, fu);
  }
  return best;
}

}  // namespace detail

/// Sampled estimate sup |Df(x) - Df(y)| / |x - y| over pairs in the region,
/// polished by local search on the best pair.  A lower estimate by nature.
inline LipschitzBound lip_derivative_sampled(const SmoothMapSpec& f,
                                             const BallRegion& region,
                                             int pairs, std::uint64_t seed) {
  if (region.radius <= 0.0)
    throw Error(errc::invalid_parameter, "region radius must be positive");
  if (pairs < 8)
    throw Error(errc::invalid_parameter, "need at least 8 sample pairs");
  const int n = f.input_dim();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&] {
    Vec u = unit_dir(n, rng);
    double r = region.radius * std::pow(unif(rng), 1.0 / n);
    return Vec(region.center + r * u);
  };
  auto ratio = [&](const Vec& x, const Vec& y) {
    double d = (x - y).norm();
    if (d < 1e-12 * (1.0 + region.radius)) return 0.0;
    return operator_norm(jacobian(f, x) - jacobian(f, y)) / d;
  };
  double best = 0.0;
  Vec bx, by;
  for (int k = 0; k < pairs; ++k) {
    Vec x = draw(), y = draw();
    double r = ratio(x, y);
    if (r > best) {
      best = r;
      bx = x;
      by = y;
    }
  }
  if (best > 0.0) {
    Vec xy(2 * n);
    xy << bx, by;
    xy = pattern_max(
        [&](const Vec& z) { return ratio(z.head(n), z.tail(n)); },
        [&](const Vec& z) {
          return region.holds(z.head(n)) && region.holds(z.tail(n));
        },
        xy, 0.1 * region.radius, 1e-9 * region.radius);
    best = std::max(best, ratio(xy.head(n), xy.tail(n)));
  }
  return LipschitzBound{best, region, LipschitzBound::Method::sampled};
}

/// Lipschitz constant of x -> Df(x) on the region: exact for quadratic maps
/// (and equal to zero for affine ones), sampled otherwise.
inline LipschitzBound lip_derivative(const SmoothMapSpec& f,
                                     const BallRegion& region) {
  if (region.radius <= 0.0)
    throw Error(errc::invalid_parameter, "region radius must be positive");
  if (region.center.size() != f.input_dim())
    throw Error(errc::dimension_mismatch, "region center dim != input dim");
  if (f.is_quadratic())
    return LipschitzBound{detail::quadratic_lip(f), region,
                          LipschitzBound::Method::exact_quadratic};
  return lip_derivative_sampled(f, region, 2048, 20260815);
}

// --- metric regularity -------------------------------------------------

/// reg(f; x0) = 1 / smin(Df(x0)) in Euclidean coordinates; infinite when the
/// derivative is not onto.  Maps with m > n can never be onto.
struct RegularityBound {
  double value = kInf;
  Vec x0;
  bool surjective = false;
};

inline RegularityBound reg_bound(const SmoothMapSpec& f, const Vec& x0) {
  if (f.output_dim() > f.input_dim())
    throw Error(errc::not_onto, "output dim exceeds input dim");
  if (x0.size() != f.input_dim())
    throw Error(errc::dimension_mismatch, "point dim != map input dim");
  Mat J = jacobian(f, x0);
  auto sv = J.jacobiSvd().singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  RegularityBound rb;
  rb.x0 = x0;
  if (smax <= 0.0 || smin <= 1e-10 * smax) return rb;  // rank deficient
  rb.surjective = true;
  rb.value = 1.0 / smin;
  return rb;
}

// --- second-order midpoint estimate ------------------------------------

/// |(f(x1) + f(x2))/2 - f((x1+x2)/2)| <= lip/8 * |x1 - x2|^2 whenever the
/// chord lies in the region the Lipschitz bound was computed on.
struct MidpointDefect {
  double defect = 0.0;
  double bound = 0.0;
  bool ok = false;
};

inline MidpointDefect midpoint_defect_check(const SmoothMapSpec& f,
                                            const Vec& x1, const Vec& x2,
                                            const LipschitzBound& lip,
                                            double tol = 1e-9) {
  if (!lip.region.holds(x1) || !lip.region.holds(x2))
    throw Error(errc::region_violation,
                "chord endpoints leave the Lipschitz region");
  MidpointDefect md;
  md.defect =
      (0.5 * (eval_map(f, x1) + eval_map(f, x2)) - eval_map(f, Vec(0.5 * (x1 + x2))))
          .norm();
  md.bound = lip.value / 8.0 * (x1 - x2).squaredNorm();
  md.ok = md.defect <= md.bound + tol * (1.0 + md.bound);
  return md;
}

// --- image diameter ------------------------------------------------------

struct ImageDiameterBound {
  double derivative_sup = 0.0;  // sampled sup of |Df| over the set
  double bound = 0.0;           // derivative_sup * diam(S) >= diam f(S)
  double beta = 1.0;            // strict derivative majorant, sup + 1
};

template <geometry::MembershipSet S>
ImageDiameterBound image_diameter_bound(const SmoothMapSpec& f, const S& set,
                                        int samples, std::uint64_t seed) {
  if (set.dimension() != f.input_dim())
    throw Error(errc::dimension_mismatch, "set dim != map input dim");
  auto norm_at = [&](const Vec& x) { return operator_norm(jacobian(f, x)); };
  double sup = 0.0;
  Vec argmax = set.interior_point();
  for (const Vec& x : geometry::sample_points(set, samples, seed)) {
    double v = norm_at(x);
    if (v > sup) {
      sup = v;
      argmax = x;
    }
  }
  const double diam = set.diameter();
  argmax = pattern_max(norm_at,
                       [&](const Vec& z) { return set.margin(z) >= 0.0; },
                       argmax, 0.05 * diam, 1e-10 * diam);
  sup = std::max(sup, norm_at(argmax));
  ImageDiameterBound out;
  out.derivative_sup = sup;
  out.bound = sup * diam;
  out.beta = sup + 1.0;
  return out;
}

}  // namespace uniconv::calculus
