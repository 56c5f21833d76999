#pragma once

// Problem-file format: a line-oriented text document with sections `space`,
// `objective`, `constraint`, `set`, `point`, `options`.  Keys take all their
// values on one line (matrices row-major), `#` starts a comment.  Parsing is
// line-anchored: every syntax error names its line; semantic errors carry
// distinct codes (dimension mismatch, asymmetric matrix, unknown set kind).
// Documents round-trip: parse -> serialize -> parse yields identical data.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uniconv/calculus.hpp"
#include "uniconv/cones.hpp"
#include "uniconv/errors.hpp"
#include "uniconv/geometry.hpp"
#include "uniconv/numeric.hpp"
#include "uniconv/optim.hpp"

namespace uniconv::io {

struct Options {
  double tol = 1e-6;
  std::uint64_t seed = 2026;
  int samples = 4096;
  int grid = 33;    // multiplier / dual search grid per dimension
  int cells = 96;   // raster cells across the image extent
};

struct SetDesc {
  std::string kind = "ball";         // ball | lens | sublevel
  std::vector<Vec> centers;          // ball: one; lens: two or more
  double radius = 1.0;
  double p = 2.0;                    // ball exponent
  geometry::QuadraticFunction phi;   // sublevel data
  double alpha = 0.0;
  double kappa = 1.0;                // theta(s) = kappa * s^power
  double power = 2.0;
  double lip = 1.0;
};

enum class TargetKind { none, singleton, cone };

struct ProblemDocument {
  int dim = 0;
  double norm_p = 2.0;
  geometry::QuadraticFunction objective;
  std::vector<geometry::QuadraticFunction> constraints;
  TargetKind target_kind = TargetKind::none;
  Vec target_point;
  std::vector<ConeRel> target_rels;
  SetDesc set;
  Vec x0;
  Options options;

  geometry::ConvexSetSpec to_set() const {
    if (set.kind == "ball")
      return geometry::ConvexSetSpec::pnorm_ball(set.centers.at(0), set.radius,
                                                 set.p);
    if (set.kind == "lens")
      return geometry::ConvexSetSpec::ball_intersection(set.centers,
                                                        set.radius);
    if (set.kind == "sublevel")
      return geometry::ConvexSetSpec::sublevel(
          set.phi, set.alpha, geometry::ThetaSpec{set.kappa, set.power},
          set.lip);
    throw Error(errc::unknown_set_kind, "unknown set kind '" + set.kind + "'");
  }

  optim::TargetSpec to_target() const {
    switch (target_kind) {
      case TargetKind::singleton:
        return optim::TargetSpec::singleton(target_point);
      case TargetKind::cone: {
        ConeSpec c;
        c.rel = target_rels;
        return optim::TargetSpec::cone(c);
      }
      case TargetKind::none:
        // Unconstrained: identity map into the whole space.
        return optim::TargetSpec::cone(ConeSpec::all(ConeRel::free_dim, dim));
    }
    throw Error(errc::parse_error, "corrupt target kind");
  }

  optim::ProblemSpec to_problem() const {
    auto obj = calculus::SmoothMapSpec::quadratic({objective});
    auto g = constraints.empty()
                 ? calculus::SmoothMapSpec::affine(Mat::Identity(dim, dim),
                                                   Vec::Zero(dim))
                 : calculus::SmoothMapSpec::quadratic(constraints);
    return optim::ProblemSpec::create(std::move(obj), std::move(g), to_set(),
                                      to_target(), x0);
  }
};

namespace detail {

[[noreturn]] inline void fail(int ln, const std::string& what) {
  throw Error(errc::parse_error, "line " + std::to_string(ln) + ": " + what);
}

inline std::vector<std::string> tokens_of(std::string line) {
  if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

inline double num(const std::string& tok, int ln) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE)
    fail(ln, "expected a number, got '" + tok + "'");
  return v;
}

inline long long integer(const std::string& tok, int ln) {
  const double v = num(tok, ln);
  const long long i = static_cast<long long>(v);
  if (static_cast<double>(i) != v)
    fail(ln, "expected an integer, got '" + tok + "'");
  return i;
}

inline std::uint64_t uint_of(const std::string& tok, int ln) {
  if (tok.empty() || tok[0] == '-') fail(ln, "expected a nonnegative integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || errno == ERANGE)
    fail(ln, "expected a nonnegative integer, got '" + tok + "'");
  return v;
}

inline Vec vec_of(const std::vector<std::string>& toks, std::size_t from,
                  int ln) {
  Vec v(static_cast<int>(toks.size() - from));
  for (std::size_t i = from; i < toks.size(); ++i)
    v[static_cast<int>(i - from)] = num(toks[i], ln);
  return v;
}

inline geometry::QuadraticFunction zero_quadratic(int n) {
  geometry::QuadraticFunction q;
  q.A = Mat::Zero(n, n);
  q.b = Vec::Zero(n);
  q.c = 0.0;
  return q;
}

inline void size_quadratic(geometry::QuadraticFunction& q, int n,
                           const std::string& where) {
  if (q.A.size() == 0) q.A = Mat::Zero(n, n);
  if (q.b.size() == 0) q.b = Vec::Zero(n);
  if (q.A.rows() != n || q.A.cols() != n || q.b.size() != n)
    throw Error(errc::dimension_mismatch, where + " data does not match dim");
  if (!q.symmetric())
    throw Error(errc::asymmetric_matrix, where + " matrix A is not symmetric");
}

}  // namespace detail

inline ProblemDocument parse_problem(const std::string& text) {
  ProblemDocument doc;
  enum class Sec { none, space, objective, constraint, set, point, options };
  Sec sec = Sec::none;
  bool in_component = false;
  bool saw_point = false;
  bool set_p_given = false;
  int ln = 0;

  auto need_dim = [&](const char* what) {
    if (doc.dim <= 0)
      detail::fail(ln, std::string("space section with dim must precede ") +
                           what);
  };
  auto mat_of = [&](const std::vector<std::string>& toks) {
    const int n = doc.dim;
    if (static_cast<int>(toks.size()) - 1 != n * n)
      detail::fail(ln, "matrix needs " + std::to_string(n * n) +
                           " row-major entries");
    Mat M(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        M(r, c) = detail::num(toks[static_cast<std::size_t>(1 + r * n + c)], ln);
    return M;
  };
  auto dim_vec = [&](const std::vector<std::string>& toks, const char* what) {
    Vec v = detail::vec_of(toks, 1, ln);
    if (v.size() != doc.dim)
      detail::fail(ln, std::string(what) + " needs exactly " +
                           std::to_string(doc.dim) + " entries");
    return v;
  };

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++ln;
    const auto toks = detail::tokens_of(raw);
    if (toks.empty()) continue;
    const std::string& key = toks[0];

    if (toks.size() == 1) {
      if (key == "space") { sec = Sec::space; continue; }
      if (key == "objective") { sec = Sec::objective; need_dim("objective"); continue; }
      if (key == "constraint") { sec = Sec::constraint; need_dim("constraint"); in_component = false; continue; }
      if (key == "set") { sec = Sec::set; need_dim("set"); continue; }
      if (key == "point") { sec = Sec::point; need_dim("point"); continue; }
      if (key == "options") { sec = Sec::options; continue; }
    }

    switch (sec) {
      case Sec::none:
        detail::fail(ln, "content before any section");
      case Sec::space:
        if (key == "dim" && toks.size() == 2) {
          const long long d = detail::integer(toks[1], ln);
          if (d < 1 || d > 8) detail::fail(ln, "dim must be in [1, 8]");
          doc.dim = static_cast<int>(d);
        } else if (key == "norm" && toks.size() == 2) {
          doc.norm_p = detail::num(toks[1], ln);
          if (doc.norm_p <= 1.0) detail::fail(ln, "norm exponent must be > 1");
        } else {
          detail::fail(ln, "unknown space entry '" + key + "'");
        }
        break;
      case Sec::objective:
        if (key == "A") doc.objective.A = mat_of(toks);
        else if (key == "b") doc.objective.b = dim_vec(toks, "b");
        else if (key == "c" && toks.size() == 2)
          doc.objective.c = detail::num(toks[1], ln);
        else detail::fail(ln, "unknown objective entry '" + key + "'");
        break;
      case Sec::constraint:
        if (key == "component") {
          doc.constraints.push_back(detail::zero_quadratic(doc.dim));
          in_component = true;
        } else if (key == "target") {
          if (toks.size() < 2) detail::fail(ln, "target needs a kind");
          if (toks[1] == "singleton") {
            doc.target_kind = TargetKind::singleton;
            doc.target_point = detail::vec_of(toks, 2, ln);
          } else if (toks[1] == "cone") {
            doc.target_kind = TargetKind::cone;
            doc.target_rels.clear();
            for (std::size_t i = 2; i < toks.size(); ++i) {
              if (toks[i] == "le0") doc.target_rels.push_back(ConeRel::le0);
              else if (toks[i] == "ge0") doc.target_rels.push_back(ConeRel::ge0);
              else if (toks[i] == "eq0") doc.target_rels.push_back(ConeRel::eq0);
              else if (toks[i] == "free") doc.target_rels.push_back(ConeRel::free_dim);
              else detail::fail(ln, "unknown cone relation '" + toks[i] + "'");
            }
            if (doc.target_rels.empty())
              detail::fail(ln, "cone target needs at least one relation");
          } else {
            detail::fail(ln, "unknown target kind '" + toks[1] + "'");
          }
        } else if (in_component && key == "A") {
          doc.constraints.back().A = mat_of(toks);
        } else if (in_component && key == "b") {
          doc.constraints.back().b = dim_vec(toks, "b");
        } else if (in_component && key == "c" && toks.size() == 2) {
          doc.constraints.back().c = detail::num(toks[1], ln);
        } else {
          detail::fail(ln, "unknown constraint entry '" + key + "'");
        }
        break;
      case Sec::set:
        if (key == "kind" && toks.size() == 2) doc.set.kind = toks[1];
        else if (key == "center") doc.set.centers.push_back(dim_vec(toks, "center"));
        else if (key == "radius" && toks.size() == 2)
          doc.set.radius = detail::num(toks[1], ln);
        else if (key == "p" && toks.size() == 2) {
          doc.set.p = detail::num(toks[1], ln);
          set_p_given = true;
        } else if (key == "A") doc.set.phi.A = mat_of(toks);
        else if (key == "b") doc.set.phi.b = dim_vec(toks, "b");
        else if (key == "c" && toks.size() == 2)
          doc.set.phi.c = detail::num(toks[1], ln);
        else if (key == "alpha" && toks.size() == 2)
          doc.set.alpha = detail::num(toks[1], ln);
        else if (key == "kappa" && toks.size() == 2)
          doc.set.kappa = detail::num(toks[1], ln);
        else if (key == "power" && toks.size() == 2)
          doc.set.power = detail::num(toks[1], ln);
        else if (key == "lip" && toks.size() == 2)
          doc.set.lip = detail::num(toks[1], ln);
        else detail::fail(ln, "unknown set entry '" + key + "'");
        break;
      case Sec::point:
        if (key == "x0") {
          doc.x0 = dim_vec(toks, "x0");
          saw_point = true;
        } else {
          detail::fail(ln, "unknown point entry '" + key + "'");
        }
        break;
      case Sec::options:
        if (key == "tol" && toks.size() == 2)
          doc.options.tol = detail::num(toks[1], ln);
        else if (key == "seed" && toks.size() == 2)
          doc.options.seed = detail::uint_of(toks[1], ln);
        else if (key == "samples" && toks.size() == 2)
          doc.options.samples = static_cast<int>(detail::integer(toks[1], ln));
        else if (key == "grid" && toks.size() == 2)
          doc.options.grid = static_cast<int>(detail::integer(toks[1], ln));
        else if (key == "cells" && toks.size() == 2)
          doc.options.cells = static_cast<int>(detail::integer(toks[1], ln));
        else detail::fail(ln, "unknown options entry '" + key + "'");
        break;
    }
  }

  // Structural validation with distinct error codes.
  if (doc.dim <= 0)
    throw Error(errc::parse_error, "missing space section with dim");
  if (!saw_point)
    throw Error(errc::parse_error, "missing point section with x0");
  detail::size_quadratic(doc.objective, doc.dim, "objective");
  for (std::size_t i = 0; i < doc.constraints.size(); ++i)
    detail::size_quadratic(doc.constraints[i], doc.dim,
                           "constraint component " + std::to_string(i + 1));
  if (doc.constraints.empty() && doc.target_kind != TargetKind::none)
    throw Error(errc::parse_error, "target given without constraint components");
  if (!doc.constraints.empty() && doc.target_kind == TargetKind::none) {
    doc.target_kind = TargetKind::singleton;  // default C = {0}
    doc.target_point = Vec::Zero(static_cast<int>(doc.constraints.size()));
  }
  const int k = static_cast<int>(doc.constraints.size());
  if (doc.target_kind == TargetKind::singleton && doc.target_point.size() != k)
    throw Error(errc::dimension_mismatch,
                "target point dim != number of constraint components");
  if (doc.target_kind == TargetKind::cone &&
      static_cast<int>(doc.target_rels.size()) != k)
    throw Error(errc::dimension_mismatch,
                "target cone dim != number of constraint components");

  if (doc.set.kind != "ball" && doc.set.kind != "lens" &&
      doc.set.kind != "sublevel")
    throw Error(errc::unknown_set_kind,
                "unknown set kind '" + doc.set.kind + "'");
  if (doc.set.kind == "ball" && doc.set.centers.size() != 1)
    throw Error(errc::invalid_parameter, "ball needs exactly one center");
  if (doc.set.kind == "lens" && doc.set.centers.size() < 2)
    throw Error(errc::invalid_parameter, "lens needs at least two centers");
  if (doc.set.kind == "sublevel")
    detail::size_quadratic(doc.set.phi, doc.dim, "set function");
  if (!set_p_given) doc.set.p = doc.norm_p;
  return doc;
}

inline ProblemDocument load_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(errc::parse_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_problem(ss.str());
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void emit_quadratic(std::ostringstream& os,
                           const geometry::QuadraticFunction& q,
                           const char* pad) {
  os << pad << "A";
  for (int r = 0; r < q.A.rows(); ++r)
    for (int c = 0; c < q.A.cols(); ++c) os << ' ' << fmt(q.A(r, c));
  os << '\n' << pad << "b";
  for (int i = 0; i < q.b.size(); ++i) os << ' ' << fmt(q.b[i]);
  os << '\n' << pad << "c " << fmt(q.c) << '\n';
}

inline void emit_vec(std::ostringstream& os, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) os << ' ' << fmt(v[i]);
}

}  // namespace detail

inline std::string serialize_problem(const ProblemDocument& d) {
  std::ostringstream os;
  os << "space\n  dim " << d.dim << "\n  norm " << detail::fmt(d.norm_p)
     << "\n\nobjective\n";
  detail::emit_quadratic(os, d.objective, "  ");
  if (!d.constraints.empty()) {
    os << "\nconstraint\n";
    for (const auto& q : d.constraints) {
      os << "  component\n";
      detail::emit_quadratic(os, q, "    ");
    }
    os << "  target ";
    if (d.target_kind == TargetKind::singleton) {
      os << "singleton";
      detail::emit_vec(os, d.target_point);
    } else {
      os << "cone";
      for (ConeRel r : d.target_rels) {
        switch (r) {
          case ConeRel::le0: os << " le0"; break;
          case ConeRel::ge0: os << " ge0"; break;
          case ConeRel::eq0: os << " eq0"; break;
          case ConeRel::free_dim: os << " free"; break;
        }
      }
    }
    os << '\n';
  }
  os << "\nset\n  kind " << d.set.kind << '\n';
  for (const Vec& c : d.set.centers) {
    os << "  center";
    detail::emit_vec(os, c);
    os << '\n';
  }
  if (d.set.kind == "ball" || d.set.kind == "lens")
    os << "  radius " << detail::fmt(d.set.radius) << '\n';
  if (d.set.kind == "ball") os << "  p " << detail::fmt(d.set.p) << '\n';
  if (d.set.kind == "sublevel") {
    detail::emit_quadratic(os, d.set.phi, "  ");
    os << "  alpha " << detail::fmt(d.set.alpha) << '\n'
       << "  kappa " << detail::fmt(d.set.kappa) << '\n'
       << "  power " << detail::fmt(d.set.power) << '\n'
       << "  lip " << detail::fmt(d.set.lip) << '\n';
  }
  os << "\npoint\n  x0";
  detail::emit_vec(os, d.x0);
  os << "\n\noptions\n  tol " << detail::fmt(d.options.tol) << "\n  seed "
     << d.options.seed << "\n  samples " << d.options.samples << "\n  grid "
     << d.options.grid << "\n  cells " << d.options.cells << '\n';
  return os.str();
}

/// Replaces the set radius (flag override); only ball and lens sets carry one.
inline void override_radius(ProblemDocument& d, double r) {
  if (r <= 0.0)
    throw Error(errc::invalid_parameter, "radius must be positive");
  if (d.set.kind != "ball" && d.set.kind != "lens")
    throw Error(errc::invalid_parameter,
                "radius override needs a ball or lens set");
  d.set.radius = r;
}

}  // namespace uniconv::io
