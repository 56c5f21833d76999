#pragma once

// Coordinate cones: products of {0}, (-inf, 0], [0, inf) and R, used both as
// constraint targets and as the comparison cones of the image diagnostics.

#include <vector>

#include "uniconv/errors.hpp"
#include "uniconv/numeric.hpp"

namespace uniconv {

enum class ConeRel { eq0, le0, ge0, free_dim };

struct ConeSpec {
  std::vector<ConeRel> rel;

  int dim() const { return static_cast<int>(rel.size()); }

  static ConeSpec all(ConeRel r, int k) {
    ConeSpec c;
    c.rel.assign(static_cast<size_t>(k), r);
    return c;
  }

  Vec project(const Vec& y) const {
    if (y.size() != dim())
      throw Error(errc::dimension_mismatch, "cone dim != vector dim");
    Vec out = y;
    for (int i = 0; i < dim(); ++i) {
      switch (rel[i]) {
        case ConeRel::eq0: out[i] = 0.0; break;
        case ConeRel::le0: out[i] = std::min(y[i], 0.0); break;
        case ConeRel::ge0: out[i] = std::max(y[i], 0.0); break;
        case ConeRel::free_dim: break;
      }
    }
    return out;
  }

  double distance(const Vec& y) const { return (y - project(y)).norm(); }

  bool contains(const Vec& y, double tol = 0.0) const {
    return distance(y) <= tol;
  }

  /// Polar (nonpositive dual) cone C^- = {y* : <y*, y> <= 0 for all y in C}.
  ConeSpec polar() const {
    ConeSpec d;
    d.rel.reserve(rel.size());
    for (ConeRel r : rel) {
      switch (r) {
        case ConeRel::eq0: d.rel.push_back(ConeRel::free_dim); break;
        case ConeRel::le0: d.rel.push_back(ConeRel::ge0); break;
        case ConeRel::ge0: d.rel.push_back(ConeRel::le0); break;
        case ConeRel::free_dim: d.rel.push_back(ConeRel::eq0); break;
      }
    }
    return d;
  }
};

}  // namespace uniconv
