#pragma once

// Raster diagnostics for images of sets under smooth maps in the plane:
// occupancy grids from low-discrepancy sampling, midpoint convexity tests,
// exact Euclidean distance transforms, sampled image moduli of convexity and
// convex-likeness checks against a cone.  Everything is deterministic for a
// fixed seed; analysis passes work on a morphologically closed copy so that
// speckle holes in the sampling never read as nonconvexity.

#include <cstdint>
#include <fstream>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uniconv/calculus.hpp"
#include "uniconv/cones.hpp"
#include "uniconv/errors.hpp"
#include "uniconv/geometry.hpp"

namespace uniconv::imagecheck {

struct RasterImage {
  double h = 0.0;       // cell edge length
  double lo_x = 0.0;    // window corner
  double lo_y = 0.0;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> marked;
  std::int64_t marked_count = 0;
  std::int64_t samples_used = 0;

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx + i;
  }
  bool inside(int i, int j) const {
    return i >= 0 && i < nx && j >= 0 && j < ny;
  }
  bool at(int i, int j) const {
    return inside(i, j) && marked[index(i, j)] != 0;
  }
  std::pair<int, int> cell_of(double x, double y) const {
    return {static_cast<int>(std::floor((x - lo_x) / h)),
            static_cast<int>(std::floor((y - lo_y) / h))};
  }
  Vec center(int i, int j) const {
    Vec c(2);
    c << lo_x + (i + 0.5) * h, lo_y + (j + 0.5) * h;
    return c;
  }
};

namespace detail {

inline RasterImage make_grid(double lox, double loy, double w, double ht,
                             double h) {
  if (h <= 0.0)
    throw Error(errc::invalid_parameter, "cell size must be positive");
  RasterImage img;
  img.h = h;
  img.lo_x = lox;
  img.lo_y = loy;
  img.nx = std::max(1, static_cast<int>(std::ceil(w / h)));
  img.ny = std::max(1, static_cast<int>(std::ceil(ht / h)));
  if (static_cast<std::int64_t>(img.nx) * img.ny > 40'000'000)
    throw Error(errc::invalid_parameter, "raster exceeds 4e7 cells");
  img.marked.assign(static_cast<std::size_t>(img.nx) * img.ny, 0);
  return img;
}

}  // namespace detail

/// Mark every cell whose center satisfies the predicate.  Dense and exact at
/// cell resolution; used for analytic control shapes.
inline RasterImage rasterize_predicate(
    const std::function<bool(double, double)>& pred, const geometry::Box& window,
    double h) {
  if (window.dimension() != 2)
    throw Error(errc::dimension_mismatch, "raster window must be planar");
  RasterImage img = detail::make_grid(window.lo[0], window.lo[1],
                                      window.hi[0] - window.lo[0],
                                      window.hi[1] - window.lo[1], h);
  for (int j = 0; j < img.ny; ++j)
    for (int i = 0; i < img.nx; ++i) {
      Vec c = img.center(i, j);
      if (pred(c[0], c[1])) {
        img.marked[img.index(i, j)] = 1;
        ++img.marked_count;
      }
    }
  return img;
}

/// Occupancy raster of f(S) for planar-image maps.  A pilot pass over the
/// same deterministic Halton stream fixes the window; the marking pass then
/// deposits density * cells samples.  Every marked cell contains at least one
/// sampled image point.  The window is grown and the raster rebuilt in the
/// rare case a later sample escapes the pilot estimate.
template <geometry::MembershipSet S>
RasterImage rasterize_image(const calculus::SmoothMapSpec& f, const S& set,
                            double h, double density, std::uint64_t seed) {
  if (f.output_dim() != 2)
    throw Error(errc::unsupported, "raster diagnostics need a planar image");
  if (f.input_dim() != set.dimension())
    throw Error(errc::dimension_mismatch, "set dim != map input dim");
  if (density < 1.0)
    throw Error(errc::invalid_parameter, "density must be >= 1");

  const geometry::Box bb = set.bounding_box();
  const int n = set.dimension();
  const std::uint64_t offset = (seed * 0x9E3779B97F4A7C15ull) >> 34;
  auto stream = [&](std::uint64_t count,
                    const std::function<void(const Vec&)>& sink) {
    std::uint64_t accepted = 0;
    for (std::uint64_t k = 0; accepted < count; ++k) {
      if (k > 64 * count + 4096)
        throw Error(errc::unsupported, "set too thin to rasterise");
      Vec x = bb.map01(halton_point(offset + k, n));
      if (set.margin(x) < 0.0) continue;
      ++accepted;
      sink(eval_map(f, x));
    }
  };

  const std::uint64_t pilot = 200'000;
  double xlo = kInf, xhi = -kInf, ylo = kInf, yhi = -kInf;
  stream(pilot, [&](const Vec& y) {
    xlo = std::min(xlo, y[0]);
    xhi = std::max(xhi, y[0]);
    ylo = std::min(ylo, y[1]);
    yhi = std::max(yhi, y[1]);
  });

  double pad = 0.05 * std::hypot(xhi - xlo, yhi - ylo) + 2.0 * h;
  for (int round = 0; round < 4; ++round) {
    RasterImage img = detail::make_grid(xlo - pad, ylo - pad,
                                        (xhi - xlo) + 2 * pad,
                                        (yhi - ylo) + 2 * pad, h);
    const std::uint64_t want = std::min<std::uint64_t>(
        30'000'000,
        std::max<std::uint64_t>(
            pilot, static_cast<std::uint64_t>(
                       density * static_cast<double>(img.nx) * img.ny)));
    std::int64_t escaped = 0;
    stream(want, [&](const Vec& y) {
      auto [i, j] = img.cell_of(y[0], y[1]);
      if (!img.inside(i, j)) {
        ++escaped;
        return;
      }
      auto& cell = img.marked[img.index(i, j)];
      if (!cell) {
        cell = 1;
        ++img.marked_count;
      }
    });
    img.samples_used = static_cast<std::int64_t>(want);
    if (escaped == 0) return img;
    pad *= 2.0;
  }
  throw Error(errc::verification_failure,
              "image samples kept escaping the raster window");
}

/// 3x3 morphological closing (dilate then erode).  Fills one-cell speckle
/// holes left by sampling without growing the set by more than one cell.
inline RasterImage closed_raster(const RasterImage& img) {
  RasterImage dil = img;
  auto pass = [&](const RasterImage& src, bool dilate) {
    RasterImage dst = src;
    dst.marked_count = 0;
    for (int j = 0; j < src.ny; ++j)
      for (int i = 0; i < src.nx; ++i) {
        bool any = false, all = true;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            bool m = src.at(i + di, j + dj);
            any = any || m;
            all = all && m;
          }
        bool v = dilate ? any : all;
        dst.marked[dst.index(i, j)] = v ? 1 : 0;
        if (v) ++dst.marked_count;
      }
    return dst;
  };
  dil = pass(img, true);
  return pass(dil, false);
}

// --- midpoint convexity ----------------------------------------------------

struct MidpointTestResult {
  std::int64_t pairs = 0;
  std::int64_t violations = 0;
  bool ok = false;
};

/// Samples pairs of occupied cells and requires the midpoint to land within
/// one cell of occupied territory (on the closed raster).  A convex image
/// passes; a hole of two or more cells produces violations.
inline MidpointTestResult midpoint_convexity_test(const RasterImage& img,
                                                  int pairs,
                                                  std::uint64_t seed) {
  if (pairs < 1)
    throw Error(errc::invalid_parameter, "need at least one midpoint pair");
  std::vector<std::pair<int, int>> cells;
  cells.reserve(static_cast<std::size_t>(img.marked_count));
  for (int j = 0; j < img.ny; ++j)
    for (int i = 0; i < img.nx; ++i)
      if (img.marked[img.index(i, j)]) cells.emplace_back(i, j);
  if (cells.size() < 2)
    throw Error(errc::invalid_parameter, "raster has fewer than two cells");

  const RasterImage closed = closed_raster(img);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  MidpointTestResult res;
  res.pairs = pairs;
  for (int k = 0; k < pairs; ++k) {
    auto [i1, j1] = cells[pick(rng)];
    auto [i2, j2] = cells[pick(rng)];
    Vec mid = 0.5 * (img.center(i1, j1) + img.center(i2, j2));
    auto [mi, mj] = img.cell_of(mid[0], mid[1]);
    bool hit = false;
    for (int dj = -1; dj <= 1 && !hit; ++dj)
      for (int di = -1; di <= 1 && !hit; ++di)
        hit = closed.at(mi + di, mj + dj);
    if (!hit) ++res.violations;
  }
  res.ok = res.violations == 0;
  return res;
}

// --- exact Euclidean distance transform -----------------------------------

namespace detail {

/// Felzenszwalb-Huttenlocher 1-D squared distance transform.
inline void dt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  d.assign(f.size(), 0.0);
  std::vector<int> v(f.size());
  std::vector<double> z(f.size() + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace detail

/// Squared Euclidean distance (in cell units) from each cell center to the
/// nearest unmarked cell center; cells beyond the grid count as unmarked.
inline std::vector<double> distance_transform(const RasterImage& img) {
  const int nx = img.nx, ny = img.ny;
  // Pad one ring of unmarked cells so the border behaves as open space.
  // Marked cells seed a large finite value: keeps the parabola envelope free
  // of inf - inf while dominating any reachable squared distance.
  const int px = nx + 2, py = ny + 2;
  const double far = 4.0 * (static_cast<double>(px) * px +
                            static_cast<double>(py) * py);
  std::vector<double> grid(static_cast<std::size_t>(px) * py, 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      grid[static_cast<std::size_t>(j + 1) * px + (i + 1)] =
          img.marked[img.index(i, j)] ? far : 0.0;

  std::vector<double> col(py), out_col(py), row(px), out_row(px);
  for (int i = 0; i < px; ++i) {
    for (int j = 0; j < py; ++j) col[j] = grid[static_cast<std::size_t>(j) * px + i];
    detail::dt_1d(col, out_col);
    for (int j = 0; j < py; ++j) grid[static_cast<std::size_t>(j) * px + i] = out_col[j];
  }
  for (int j = 0; j < py; ++j) {
    for (int i = 0; i < px; ++i) row[i] = grid[static_cast<std::size_t>(j) * px + i];
    detail::dt_1d(row, out_row);
    for (int i = 0; i < px; ++i) grid[static_cast<std::size_t>(j) * px + i] = out_row[i];
  }
  std::vector<double> out(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out[img.index(i, j)] = grid[static_cast<std::size_t>(j + 1) * px + (i + 1)];
  return out;
}

// --- sampled image modulus --------------------------------------------------

struct ModulusPoint {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t pairs = 0;
};

struct ImageModulusFit {
  std::vector<ModulusPoint> curve;
  double c_hat = 0.0;  // min over the curve of delta / epsilon^2
};

/// Estimates the modulus of convexity of the rastered set: for each chord
/// length, the minimum inscribed radius at midpoints of near-boundary cell
/// pairs, read off the distance transform (half a cell subtracted to stay
/// conservative).  Chord lengths that attract too few pairs are dropped.
inline ImageModulusFit empirical_image_modulus(const RasterImage& img,
                                               std::span<const double> eps_grid,
                                               int pairs_per_eps,
                                               std::uint64_t seed) {
  if (eps_grid.empty())
    throw Error(errc::invalid_parameter, "empty chord grid");
  if (pairs_per_eps < 32)
    throw Error(errc::invalid_parameter, "need >= 32 pairs per chord length");
  const RasterImage closed = closed_raster(img);
  const auto dist2 = distance_transform(closed);

  std::vector<std::pair<int, int>> boundary;
  for (int j = 0; j < closed.ny; ++j)
    for (int i = 0; i < closed.nx; ++i) {
      if (!closed.marked[closed.index(i, j)]) continue;
      if (!closed.at(i - 1, j) || !closed.at(i + 1, j) || !closed.at(i, j - 1) ||
          !closed.at(i, j + 1))
        boundary.emplace_back(i, j);
    }
  if (boundary.size() < 8)
    throw Error(errc::invalid_parameter, "raster boundary is degenerate");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, boundary.size() - 1);
  ImageModulusFit fit;
  fit.c_hat = kInf;
  for (double eps : eps_grid) {
    if (eps <= 0.0)
      throw Error(errc::invalid_parameter, "chord lengths must be positive");
    const double tol = std::max(closed.h, 0.02 * eps);
    double worst = kInf;
    std::int64_t accepted = 0;
    const std::int64_t budget = 256ll * pairs_per_eps;
    for (std::int64_t k = 0; k < budget && accepted < pairs_per_eps; ++k) {
      auto [i1, j1] = boundary[pick(rng)];
      auto [i2, j2] = boundary[pick(rng)];
      Vec c1 = closed.center(i1, j1), c2 = closed.center(i2, j2);
      if (std::abs((c1 - c2).norm() - eps) > tol) continue;
      ++accepted;
      Vec mid = 0.5 * (c1 + c2);
      auto [mi, mj] = closed.cell_of(mid[0], mid[1]);
      double delta = 0.0;
      if (closed.at(mi, mj)) {
        double r_cells = std::sqrt(dist2[closed.index(mi, mj)]);
        delta = std::max(0.0, (r_cells - 0.5) * closed.h);
      }
      worst = std::min(worst, delta);
    }
    if (accepted < std::max(32, pairs_per_eps / 8)) continue;  // starved
    ModulusPoint pt;
    pt.epsilon = eps;
    pt.delta = worst;
    pt.pairs = accepted;
    fit.curve.push_back(pt);
    fit.c_hat = std::min(fit.c_hat, worst / (eps * eps));
  }
  if (fit.curve.empty())
    throw Error(errc::invalid_parameter,
                "no chord length produced enough boundary pairs");
  return fit;
}

// --- convex-likeness against a cone ---------------------------------------

struct ConvexLikeResult {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  bool ok = false;
};

/// Checks (1-t) f(x1) + t f(x2) in f(S) + C on sampled pairs and
/// t in {1/4, 1/2, 3/4}, at one-cell raster tolerance.  Membership in
/// f(S) + C is resolved by directional prefix sweeps over the raster.
template <geometry::MembershipSet S>
ConvexLikeResult convex_like_check(const calculus::SmoothMapSpec& f,
                                   const S& set, const ConeSpec& cone,
                                   int samples, const RasterImage& img,
                                   std::uint64_t seed) {
  if (cone.dim() != 2)
    throw Error(errc::dimension_mismatch, "planar raster needs a 2-D cone");
  if (samples < 2)
    throw Error(errc::invalid_parameter, "need >= 2 sample points");

  // reach[i][j] = some occupied cell m has center(i,j) in m + C.
  RasterImage reach = closed_raster(img);
  // One extra dilation supplies the one-cell tolerance.
  {
    RasterImage dil = reach;
    for (int j = 0; j < reach.ny; ++j)
      for (int i = 0; i < reach.nx; ++i) {
        bool any = false;
        for (int dj = -1; dj <= 1 && !any; ++dj)
          for (int di = -1; di <= 1 && !any; ++di)
            any = reach.at(i + di, j + dj);
        dil.marked[dil.index(i, j)] = any ? 1 : 0;
      }
    reach = dil;
  }
  auto sweep_rows = [&](bool forward) {
    for (int j = 0; j < reach.ny; ++j) {
      bool acc = false;
      for (int s = 0; s < reach.nx; ++s) {
        int i = forward ? s : reach.nx - 1 - s;
        acc = acc || reach.marked[reach.index(i, j)];
        if (acc) reach.marked[reach.index(i, j)] = 1;
      }
    }
  };
  auto sweep_cols = [&](bool forward) {
    for (int i = 0; i < reach.nx; ++i) {
      bool acc = false;
      for (int s = 0; s < reach.ny; ++s) {
        int j = forward ? s : reach.ny - 1 - s;
        acc = acc || reach.marked[reach.index(i, j)];
        if (acc) reach.marked[reach.index(i, j)] = 1;
      }
    }
  };
  // z in m + C per axis: le0 propagates marks toward smaller coordinates,
  // ge0 toward larger, free_dim both ways, eq0 not at all.
  auto apply = [&](int axis, ConeRel r) {
    auto sweep = [&](bool forward) {
      if (axis == 0)
        sweep_rows(forward);
      else
        sweep_cols(forward);
    };
    if (r == ConeRel::le0) sweep(false);
    if (r == ConeRel::ge0) sweep(true);
    if (r == ConeRel::free_dim) {
      sweep(true);
      sweep(false);
    }
  };
  apply(0, cone.rel[0]);
  apply(1, cone.rel[1]);

  const auto pts = geometry::sample_points(set, samples, seed);
  ConvexLikeResult res;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const Vec fa = eval_map(f, pts[a]);
    const Vec fb = eval_map(f, pts[(a * 2654435761u + 1) % pts.size()]);
    for (double t : {0.25, 0.5, 0.75}) {
      Vec z = (1.0 - t) * fa + t * fb;
      ++res.checked;
      auto [i, j] = reach.cell_of(z[0], z[1]);
      if (!reach.at(i, j)) ++res.violations;
    }
  }
  res.ok = res.violations == 0;
  return res;
}

// --- writers -----------------------------------------------------------

/// Plain PBM (P1), top row = highest y, marked cells black.
inline void write_pbm(const RasterImage& img, std::ostream& os) {
  os << "P1\n" << img.nx << ' ' << img.ny << '\n';
  for (int j = img.ny - 1; j >= 0; --j) {
    int col = 0;
    for (int i = 0; i < img.nx; ++i) {
      os << (img.marked[img.index(i, j)] ? '1' : '0');
      if (++col == 64 || i == img.nx - 1) {
        os << '\n';
        col = 0;
      }
    }
  }
}

inline void write_pbm(const RasterImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(errc::invalid_parameter, "cannot open " + path);
  write_pbm(img, os);
}

inline void write_modulus_csv(const ImageModulusFit& fit, std::ostream& os) {
  os << "epsilon,delta,ratio,pairs\n";
  char buf[128];
  for (const auto& pt : fit.curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%lld\n", pt.epsilon,
                  pt.delta, pt.delta / (pt.epsilon * pt.epsilon),
                  static_cast<long long>(pt.pairs));
    os << buf;
  }
}

inline void write_modulus_csv(const ImageModulusFit& fit,
                              const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(errc::invalid_parameter, "cannot open " + path);
  write_modulus_csv(fit, os);
}

}  // namespace uniconv::imagecheck
