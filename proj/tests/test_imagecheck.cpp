#include "uniconv/imagecheck.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support/oracles.hpp"

using namespace uniconv;
using namespace uniconv::imagecheck;
using testsupport::vec2;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

geometry::Box window2(double lo, double hi) {
  return geometry::Box{vec2(lo, lo), vec2(hi, hi)};
}

RasterImage unit_disc_raster(double h) {
  return rasterize_predicate(
      [](double x, double y) { return x * x + y * y <= 1.0; },
      window2(-1.2, 1.2), h);
}

RasterImage annulus_raster(double h) {
  return rasterize_predicate(
      [](double x, double y) {
        double r2 = x * x + y * y;
        return r2 >= 0.25 && r2 <= 1.0;
      },
      window2(-1.2, 1.2), h);
}

// Complex square: the image of an off-origin disc bends into a horseshoe.
calculus::SmoothMapSpec complex_square() {
  geometry::QuadraticFunction re, im;
  re.A = (Mat(2, 2) << 2.0, 0.0, 0.0, -2.0).finished();
  re.b = Vec::Zero(2);
  im.A = (Mat(2, 2) << 0.0, 2.0, 2.0, 0.0).finished();
  im.b = Vec::Zero(2);
  return calculus::SmoothMapSpec::quadratic({re, im});
}

}  // namespace

TEST_CASE("predicate raster recovers the disc area", "[imagecheck]") {
  auto img = unit_disc_raster(0.01);
  double area = static_cast<double>(img.marked_count) * img.h * img.h;
  CHECK_THAT(area, WithinRel(std::numbers::pi, 0.025));
  CHECK(img.nx == 240);
  CHECK(img.ny == 240);
}

TEST_CASE("image raster is deterministic and covers the ellipse",
          "[imagecheck]") {
  auto f = calculus::SmoothMapSpec::affine(
      (Mat(2, 2) << 3.0, 0.0, 0.0, 1.0).finished(), vec2(1.0, -2.0));
  auto disc = geometry::ConvexSetSpec::pnorm_ball(vec2(0.0, 0.0), 0.5);
  auto img = rasterize_image(f, disc, 0.02, 8.0, 99);
  auto img2 = rasterize_image(f, disc, 0.02, 8.0, 99);
  CHECK(img.marked == img2.marked);
  CHECK(img.marked_count == img2.marked_count);
  // Ellipse semi-axes 1.5 and 0.5: area = 0.75 pi.
  double area = static_cast<double>(img.marked_count) * img.h * img.h;
  CHECK_THAT(area, WithinRel(0.75 * std::numbers::pi, 0.08));
  // Window contains the ellipse with margin.
  CHECK(img.lo_x < 1.0 - 1.5);
  CHECK(img.lo_x + img.nx * img.h > 1.0 + 1.5);
}

TEST_CASE("raster guards its inputs", "[imagecheck]") {
  auto f = complex_square();
  auto disc = geometry::ConvexSetSpec::pnorm_ball(vec2(2.0, 0.0), 0.5);
  CHECK_THROWS_AS(rasterize_image(f, disc, -0.1, 8.0, 1), Error);
  CHECK_THROWS_AS(rasterize_image(f, disc, 0.02, 0.5, 1), Error);
  auto scalar = calculus::SmoothMapSpec::quadratic({testsupport::saddle_objective()});
  CHECK_THROWS_AS(rasterize_image(scalar, disc, 0.02, 8.0, 1), Error);
}

TEST_CASE("morphological closing repairs speckle holes", "[imagecheck]") {
  auto img = unit_disc_raster(0.02);
  auto [ci, cj] = img.cell_of(0.0, 0.0);
  REQUIRE(img.at(ci, cj));
  img.marked[img.index(ci, cj)] = 0;
  --img.marked_count;
  auto fixed = closed_raster(img);
  CHECK(fixed.at(ci, cj));
  CHECK(fixed.marked_count >= img.marked_count + 1);
}

TEST_CASE("midpoint convexity: disc passes, annulus fails at every scale",
          "[imagecheck]") {
  auto disc = unit_disc_raster(0.01);
  auto res = midpoint_convexity_test(disc, 2000, 7);
  CHECK(res.ok);
  CHECK(res.pairs == 2000);
  CHECK(res.violations == 0);

  for (double h : {0.02, 0.01, 0.005}) {
    auto ann = annulus_raster(h);
    auto bad = midpoint_convexity_test(ann, 2000, 7);
    INFO("h = " << h);
    CHECK_FALSE(bad.ok);
    CHECK(bad.violations > 0);
  }
}

TEST_CASE("distance transform matches brute force", "[imagecheck]") {
  RasterImage img;
  img.h = 1.0;
  img.nx = 37;
  img.ny = 23;
  img.marked.assign(static_cast<size_t>(img.nx) * img.ny, 0);
  Rng rng(123);
  std::bernoulli_distribution bern(0.6);
  for (auto& m : img.marked)
    if (bern(rng)) {
      m = 1;
      ++img.marked_count;
    }
  auto d2 = distance_transform(img);
  for (int j = 0; j < img.ny; ++j)
    for (int i = 0; i < img.nx; ++i) {
      double best = kInf;
      if (!img.marked[img.index(i, j)]) {
        best = 0.0;
      } else {
        // Distance to the padding ring also counts.
        best = std::min({i + 1, img.nx - i, j + 1, img.ny - j});
        best *= best;
        for (int jj = 0; jj < img.ny; ++jj)
          for (int ii = 0; ii < img.nx; ++ii)
            if (!img.marked[img.index(ii, jj)])
              best = std::min(
                  best, double((ii - i) * (ii - i) + (jj - j) * (jj - j)));
      }
      INFO("cell " << i << "," << j);
      REQUIRE(d2[img.index(i, j)] == best);
    }
}

TEST_CASE("distance transform sees the disc inradius", "[imagecheck]") {
  auto img = unit_disc_raster(0.01);
  auto d2 = distance_transform(img);
  double rmax = 0.0;
  for (double v : d2) rmax = std::max(rmax, std::sqrt(v));
  CHECK_THAT(rmax * img.h, WithinAbs(1.0, 0.02));
}

TEST_CASE("image modulus of the rastered disc tracks the closed form",
          "[imagecheck]") {
  auto img = unit_disc_raster(0.004);
  const double eps[] = {0.6, 0.8, 1.0, 1.2};
  auto fit = empirical_image_modulus(img, eps, 600, 11);
  REQUIRE(fit.curve.size() == 4);
  for (const auto& pt : fit.curve) {
    double exact = 1.0 - std::sqrt(1.0 - 0.25 * pt.epsilon * pt.epsilon);
    INFO("eps = " << pt.epsilon);
    CHECK_THAT(pt.delta, WithinAbs(exact, 3.0 * img.h));
  }
  CHECK(fit.c_hat >= 0.125 - 3.0 * img.h / 0.36);
  CHECK(fit.c_hat <= 0.16);
}

TEST_CASE("convex-like check: ellipse passes, horseshoe fails",
          "[imagecheck]") {
  auto aff = calculus::SmoothMapSpec::affine(
      (Mat(2, 2) << 3.0, 0.0, 0.0, 1.0).finished(), vec2(0.0, 0.0));
  auto disc = geometry::ConvexSetSpec::pnorm_ball(vec2(0.0, 0.0), 0.5);
  auto img = rasterize_image(aff, disc, 0.02, 8.0, 3);
  ConeSpec zero = ConeSpec::all(ConeRel::eq0, 2);
  auto good = convex_like_check(aff, disc, zero, 400, img, 3);
  CHECK(good.ok);
  CHECK(good.violations == 0);
  // A downward half-space cone can only help.
  ConeSpec halfspace;
  halfspace.rel = {ConeRel::le0, ConeRel::eq0};
  CHECK(convex_like_check(aff, disc, halfspace, 400, img, 3).ok);

  auto sq = complex_square();
  auto far_disc = geometry::ConvexSetSpec::pnorm_ball(vec2(2.0, 0.0), 1.9);
  auto horseshoe = rasterize_image(sq, far_disc, 0.05, 6.0, 3);
  auto bad = convex_like_check(sq, far_disc, zero, 400, horseshoe, 3);
  CHECK_FALSE(bad.ok);
  CHECK(bad.violations > 0);
  auto badmid = midpoint_convexity_test(horseshoe, 2000, 7);
  CHECK(badmid.violations > 0);
}

TEST_CASE("pbm and csv writers produce the documented formats",
          "[imagecheck]") {
  RasterImage img;
  img.h = 1.0;
  img.nx = 3;
  img.ny = 2;
  img.marked = {1, 0, 1, 0, 1, 0};  // row j=0: 101, row j=1: 010
  img.marked_count = 3;
  std::ostringstream os;
  write_pbm(img, os);
  CHECK(os.str() == "P1\n3 2\n010\n101\n");

  ImageModulusFit fit;
  fit.curve.push_back({0.5, 0.03125, 200});
  fit.c_hat = 0.125;
  std::ostringstream cs;
  write_modulus_csv(fit, cs);
  CHECK(cs.str() == "epsilon,delta,ratio,pairs\n0.5,0.03125,0.125,200\n");
}
