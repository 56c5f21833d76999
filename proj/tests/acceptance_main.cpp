// Acceptance gate for the toolkit.  Runs nine end-to-end checks against the
// shipped worked problem plus randomized families, prints one PASS/FAIL line
// per criterion, and exits with the number of failures.  Every tolerance and
// runtime budget is pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uniconv/calculus.hpp"
#include "uniconv/certify.hpp"
#include "uniconv/geometry.hpp"
#include "uniconv/imagecheck.hpp"
#include "uniconv/optim.hpp"
#include "uniconv/problem_io.hpp"

using namespace uniconv;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Gate {
  int failures = 0;

  void run(int id, double budget_s, const char* title,
           const std::function<std::pair<bool, std::string>()>& body) {
    double t0 = now_s();
    bool ok = false;
    std::string detail;
    try {
      auto [got, text] = body();
      ok = got;
      detail = text;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double dt = now_s() - t0;
    if (budget_s > 0.0 && dt >= budget_s) {
      ok = false;
      detail += " [over budget]";
    }
    if (!ok) ++failures;
    std::printf("%s  %d  %-22s  %s  (%.2f s%s%s)\n", ok ? "PASS" : "FAIL", id,
                title, detail.c_str(), dt, budget_s > 0.0 ? " / " : "",
                budget_s > 0.0 ? (std::to_string(int(budget_s)) + " s").c_str()
                               : "");
    std::fflush(stdout);
  }
};

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Ambient-norm unit directions used by the midpoint-inclusion probe.
std::vector<Vec> probe_dirs(int n, double p, Rng& rng) {
  std::vector<Vec> dirs;
  for (int k = 0; k < 8; ++k) {
    Vec u = unit_dir(n, rng);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::pow(std::abs(u[i]), p);
    dirs.push_back(u / std::pow(s, 1.0 / p));
  }
  return dirs;
}

geometry::QuadraticFunction random_quadratic(int n, Rng& rng, double amp) {
  std::uniform_real_distribution<double> unif(-amp, amp);
  geometry::QuadraticFunction q;
  q.A = Mat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) q.A(i, j) = q.A(j, i) = unif(rng);
  q.b = Vec(n);
  for (int i = 0; i < n; ++i) q.b[i] = unif(rng);
  q.c = unif(rng);
  return q;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <problem-file>\n");
    return 64;
  }
  io::ProblemDocument doc;
  try {
    doc = io::load_problem(argv[1]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load %s: %s\n", argv[1], e.what());
    return 64;
  }

  Gate gate;
  const double kRoot2 = std::sqrt(2.0);
  std::vector<std::pair<std::string, double>> gaps;  // fed into criterion 9

  auto problem_at = [&](double r) {
    io::ProblemDocument d = doc;
    io::override_radius(d, r);
    return d.to_problem();
  };

  // 1. Metric regularity of the image-space map at the base point.
  gate.run(1, 1.0, "regularity bound", [&] {
    auto p = problem_at(0.5);
    auto isa = optim::build_image_map(p);
    auto reg = calculus::reg_bound(isa.map, p.x0);
    double err = std::abs(reg.value - 0.5);
    bool ok = reg.surjective && err <= 1e-9;
    return std::make_pair(ok, fmt("reg = %.12f, err %.2e <= 1e-9", reg.value,
                                  err));
  });

  // 2. Derivative Lipschitz constant: exact value and the sampled estimator.
  gate.run(2, 5.0, "derivative lipschitz", [&] {
    auto p = problem_at(0.5);
    auto isa = optim::build_image_map(p);
    calculus::BallRegion region{p.x0, 1.0};
    auto exact = calculus::lip_derivative(isa.map, region);
    auto sampled = calculus::lip_derivative_sampled(isa.map, region, 4096, 7);
    const double truth = 2.0 * kRoot2;
    double e1 = std::abs(exact.value - truth);
    double e2 = std::abs(sampled.value - truth) / truth;
    bool ok = e1 <= 1e-6 && e2 <= 0.02;
    return std::make_pair(
        ok, fmt("exact err %.2e <= 1e-6, sampled off by %.2f%% <= 2%%", e1,
                100.0 * e2));
  });

  // 3. Radius threshold: bisection on r with c = 1/(8r) lands on 1/sqrt(2).
  gate.run(3, 1.0, "radius threshold", [&] {
    auto p = problem_at(0.5);
    auto isa = optim::build_image_map(p);
    auto reg = calculus::reg_bound(isa.map, p.x0);
    auto lip = calculus::lip_derivative(isa.map, calculus::BallRegion{p.x0, 1.0});
    auto certified = [&](double r) {
      return certify::check_condition(1.0 / (8.0 * r), reg, lip).certified;
    };
    if (!certified(0.1) || certified(1.0))
      return std::make_pair(false, std::string("bracket endpoints wrong"));
    double lo = 0.1, hi = 1.0;
    for (int i = 0; i < 120; ++i) {
      double mid = 0.5 * (lo + hi);
      (certified(mid) ? lo : hi) = mid;
    }
    double r_star = 0.5 * (lo + hi);
    double err = std::abs(r_star - 1.0 / kRoot2);
    return std::make_pair(err <= 1e-9,
                          fmt("r* = %.12f, err %.2e <= 1e-9", r_star, err));
  });

  // 4. Worked instance at r = 0.5: solution, brute-force value, multiplier,
  //    duality gap.
  gate.run(4, 30.0, "certified solve", [&] {
    auto p = problem_at(0.5);
    auto sol = optim::global_solve(p);
    double dist_err = std::abs((sol.x - p.x0).norm() - 0.5);
    bool on_circle = sol.constraint_dist <= 1e-6;

    // Brute-force sweep of the circle parameter, 1e6 grid points.
    double best = kInf;
    const int kSweep = 1'000'000;
    for (int k = 0; k < kSweep; ++k) {
      double t = 2.0 * M_PI * (double(k) / kSweep);
      Vec x = vec2(std::cos(t), std::sin(t));
      if ((x - p.x0).norm() > 0.5) continue;
      best = std::min(best, optim::phi_value(p, x));
    }
    double val_err = std::abs(sol.value - best);

    auto mul = optim::find_multiplier(p, sol.x);
    auto gap = optim::duality_gap(p, sol);
    gaps.emplace_back("worked r=0.5", gap.gap);

    bool ok = dist_err <= 1e-6 && on_circle && val_err <= 1e-4 && mul.found &&
              mul.residual >= -1e-6 && gap.gap <= 1e-4 && gap.gap >= -1e-9;
    return std::make_pair(
        ok, fmt("|x-x0| err %.1e, value err %.1e, residual %.1e, gap %.1e",
                dist_err, val_err, mul.residual, gap.gap));
  });

  // 5. Wider set at r = 0.9: global minimum leaves the certificate region and
  //    sits at the circle top, strictly inside the set.
  gate.run(5, 30.0, "uncertified solve", [&] {
    auto p = problem_at(0.9);
    auto sol = optim::global_solve(p);
    double err = (sol.x - vec2(0.0, 1.0)).norm();
    auto gap = optim::duality_gap(p, sol);
    gaps.emplace_back("worked r=0.9", gap.gap);
    bool ok = err <= 1e-4 && sol.boundary_margin >= 0.13;
    return std::make_pair(ok, fmt("|x - (0,1)| = %.2e <= 1e-4, margin %.4f >= 0.13",
                                  err, sol.boundary_margin));
  });

  // 6. Modulus catalogue: analytic lower bounds never exceed empirical
  //    estimates; intersections obey the min-rule; power-type-2 sets satisfy
  //    midpoint inclusion on 1e3 sampled pairs per instance family.
  gate.run(6, 120.0, "modulus catalogue", [&] {
    Rng rng(20260815);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uint64_t seed = 100;
    long bound_checks = 0, bound_bad = 0;
    long incl_checks = 0, incl_bad = 0;
    long rule_bad = 0;

    auto check_bound = [&](const auto& set, double analytic_delta, double eps) {
      ++bound_checks;
      auto emp = geometry::empirical_modulus(set, eps, 200, seed++);
      if (emp.delta + 1e-12 < analytic_delta) ++bound_bad;
    };
    auto check_inclusion = [&](const auto& set, int pairs) {
      auto c_opt = set.power2_constant();
      if (!c_opt) return;
      auto pts = geometry::sample_points(set, 2 * pairs, seed++);
      auto dirs = probe_dirs(set.dimension(), set.ambient_p(), rng);
      for (int k = 0; k + 1 < int(pts.size()); k += 2) {
        double eps = p_norm(Vec(pts[k] - pts[k + 1]), set.ambient_p());
        Vec mid = 0.5 * (pts[k] + pts[k + 1]);
        double rad = *c_opt * eps * eps * (1.0 - 1e-9);
        for (const Vec& u : dirs) {
          ++incl_checks;
          if (set.margin(mid + rad * u) < 0.0) ++incl_bad;
        }
      }
    };

    // p-norm balls, p in {2, 3, 4}.
    for (double p : {2.0, 3.0, 4.0}) {
      for (int i = 0; i < 50; ++i) {
        int n = 2 + (i % 2);
        Vec center(n);
        for (int d = 0; d < n; ++d) center[d] = 2.0 * unif(rng) - 1.0;
        double r = 0.5 + 1.5 * unif(rng);
        auto set = geometry::ConvexSetSpec::pnorm_ball(center, r, p);
        double eps = (0.15 + 0.65 * unif(rng)) * 2.0 * r;
        auto mb = geometry::modulus_lp_ball(p, eps / r);
        check_bound(set, r * mb.delta, eps);
        if (p == 2.0) check_inclusion(set, 20);
      }
    }

    // Scaled Euclidean balls via the space-modulus scaling rule.
    for (int i = 0; i < 50; ++i) {
      int n = 2 + (i % 2);
      Vec center = Vec::Zero(n);
      double r = 0.25 + 2.75 * unif(rng);
      auto set = geometry::ConvexSetSpec::pnorm_ball(center, r, 2.0);
      double eps = (0.15 + 0.65 * unif(rng)) * 2.0 * r;
      auto mb = geometry::modulus_scaled(0.125, r, eps);
      auto c_set = set.power2_constant();
      if (!c_set || std::abs(*c_set - mb.c) > 1e-12 * mb.c) ++rule_bad;
      check_bound(set, mb.delta, eps);
      check_inclusion(set, 20);
    }

    // Ball intersections: the constant follows the min-rule.
    for (int i = 0; i < 50; ++i) {
      int n = 2 + (i % 2);
      int k = 2 + (i % 2);
      double r = 0.5 + 1.0 * unif(rng);
      std::vector<Vec> centers;
      for (int j = 0; j < k; ++j) {
        Vec c(n);
        for (int d = 0; d < n; ++d) c[d] = 0.4 * r * (2.0 * unif(rng) - 1.0);
        centers.push_back(c);
      }
      auto set = geometry::ConvexSetSpec::ball_intersection(centers, r);
      std::vector<double> parts(k, 1.0 / (8.0 * r));
      double c_rule = geometry::modulus_intersection(parts);
      auto c_set = set.power2_constant();
      if (!c_set || std::abs(*c_set - c_rule) > 1e-12 * c_rule) ++rule_bad;
      double eps = (0.15 + 0.55 * unif(rng)) * set.diameter();
      check_bound(set, c_rule * eps * eps, eps);
      check_inclusion(set, 20);
    }

    // Quadratic sublevel sets.
    for (int i = 0; i < 50; ++i) {
      double l1 = 0.6 + 2.4 * unif(rng), l2 = 0.6 + 2.4 * unif(rng);
      double th = 2.0 * M_PI * unif(rng);
      Mat R(2, 2);
      R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      geometry::QuadraticFunction phi;
      phi.A = R * Eigen::DiagonalMatrix<double, 2>(l1, l2) * R.transpose();
      phi.A = 0.5 * (phi.A + phi.A.transpose()).eval();
      phi.b = vec2(2.0 * unif(rng) - 1.0, 2.0 * unif(rng) - 1.0);
      phi.c = 0.0;
      Vec xmin = -phi.A.ldlt().solve(phi.b);
      double lo_val = phi.value(xmin);
      double lift = 0.3 + 0.7 * unif(rng);
      double alpha = lo_val + lift;
      double lmin = std::min(l1, l2), lmax = std::max(l1, l2);
      // |grad phi|^2 = (x-m)'A^2(x-m) <= lmax * 2*(phi - min) <= 2*lmax*lift.
      double lip = std::sqrt(2.0 * lmax * lift) * (1.0 + 1e-9);
      geometry::ThetaSpec theta{0.5 * lmin, 2.0};
      auto set = geometry::ConvexSetSpec::sublevel(phi, alpha, theta, lip);
      double eps = (0.15 + 0.55 * unif(rng)) * set.diameter();
      auto mb = geometry::modulus_sublevel(theta, lip, eps);
      check_bound(set, mb.delta, eps);
      check_inclusion(set, 20);
    }

    bool ok = bound_bad == 0 && incl_bad == 0 && rule_bad == 0;
    return std::make_pair(
        ok, fmt("%ld bound checks (%ld bad), %ld inclusion probes (%ld bad), "
                "min-rule bad %ld",
                bound_checks, bound_bad, incl_checks, incl_bad, rule_bad));
  });

  // 7. Midpoint defect bound for random quadratic maps.
  gate.run(7, 60.0, "midpoint defect", [&] {
    Rng rng(8123);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    long checks = 0, bad = 0;
    for (int k = 0; k < 100; ++k) {
      int n = 2 + (k % 2);
      int m = 2 + ((k / 2) % 2);
      std::vector<geometry::QuadraticFunction> comps;
      for (int i = 0; i < m; ++i) comps.push_back(random_quadratic(n, rng, 1.0));
      auto f = calculus::SmoothMapSpec::quadratic(comps);
      calculus::BallRegion region{Vec::Zero(n), 1.5};
      auto lip = calculus::lip_derivative(f, region);
      for (int t = 0; t < 1000; ++t) {
        Vec x1 = 1.5 * std::pow(unif(rng), 1.0 / n) * unit_dir(n, rng);
        Vec x2 = 1.5 * std::pow(unif(rng), 1.0 / n) * unit_dir(n, rng);
        auto md = calculus::midpoint_defect_check(f, x1, x2, lip);
        ++checks;
        if (md.defect > md.bound + 1e-9) ++bad;
      }
    }
    return std::make_pair(bad == 0,
                          fmt("%ld chords checked, %ld violations", checks, bad));
  });

  // 8. Image convexity oracle: rasterized images of certified planar
  //    instances pass the midpoint test with a positive fitted constant that
  //    clears the certificate floor; the annulus control must fail at every
  //    resolution.
  gate.run(8, 300.0, "image convexity", [&] {
    Rng rng(40596);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int done = 0, attempts = 0, bad = 0;
    std::string note;
    while (done < 20 && attempts < 200) {
      ++attempts;
      double th = 2.0 * M_PI * unif(rng);
      double s1 = 0.85 + 0.35 * unif(rng), s2 = 0.85 + 0.35 * unif(rng);
      Mat R(2, 2);
      R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      Mat J0 = R * Eigen::DiagonalMatrix<double, 2>(s1, s2);
      std::vector<geometry::QuadraticFunction> comps;
      for (int i = 0; i < 2; ++i) {
        auto q = random_quadratic(2, rng, 0.4);
        q.b = J0.row(i).transpose();
        q.c = 0.0;
        comps.push_back(q);
      }
      auto f = calculus::SmoothMapSpec::quadratic(comps);
      Vec x0 = vec2(unif(rng) - 0.5, unif(rng) - 0.5);
      double r = 0.15 + 0.15 * unif(rng);
      auto set = geometry::ConvexSetSpec::pnorm_ball(x0, r, 2.0);
      auto cert = certify::certify_problem(
          f, set, x0, r,
          {.samples = 2000, .seed = std::uint64_t(11 + attempts)});
      if (!cert.certified) continue;
      ++done;

      double lo0 = kInf, hi0 = -kInf, lo1 = kInf, hi1 = -kInf;
      for (const Vec& x : geometry::sample_points(set, 512, 3)) {
        Vec y = eval_map(f, x);
        lo0 = std::min(lo0, y[0]);
        hi0 = std::max(hi0, y[0]);
        lo1 = std::min(lo1, y[1]);
        hi1 = std::max(hi1, y[1]);
      }
      double h = 1.3 * std::max({hi0 - lo0, hi1 - lo1, 1e-9}) / 320.0;
      auto img = imagecheck::rasterize_image(f, set, h, 8.0, 17 + attempts);
      auto mid = imagecheck::midpoint_convexity_test(img, 4000, 5);

      int ilo = img.nx, ihi = -1, jlo = img.ny, jhi = -1;
      for (int j = 0; j < img.ny; ++j)
        for (int i = 0; i < img.nx; ++i)
          if (img.marked[img.index(i, j)]) {
            ilo = std::min(ilo, i);
            ihi = std::max(ihi, i);
            jlo = std::min(jlo, j);
            jhi = std::max(jhi, j);
          }
      double diag = img.h * std::hypot(double(ihi - ilo + 1), double(jhi - jlo + 1));
      const double eps_grid[] = {0.3 * diag, 0.45 * diag, 0.6 * diag};
      auto fit = imagecheck::empirical_image_modulus(img, eps_grid, 256, 23);
      double tol_raster = 1.5 * img.h / (eps_grid[0] * eps_grid[0]);
      bool inst_ok = mid.ok && fit.c_hat > 0.0 &&
                     fit.c_hat >= cert.image_modulus_constant - tol_raster;
      if (!inst_ok) {
        ++bad;
        note = fmt(" [inst %d: mid %d, c_hat %.3e, floor %.3e]", done, int(mid.ok),
                   fit.c_hat, cert.image_modulus_constant - tol_raster);
      }
    }

    // Annulus negative control: a genuine hole must be flagged at every
    // raster resolution.
    geometry::Box window{vec2(-1.1, -1.1), vec2(1.1, 1.1)};
    auto annulus = [](double x, double y) {
      double r2 = x * x + y * y;
      return r2 >= 0.25 && r2 <= 1.0;
    };
    int control_misses = 0;
    for (double h : {0.02, 0.01, 0.005}) {
      auto img = imagecheck::rasterize_predicate(annulus, window, h);
      auto mid = imagecheck::midpoint_convexity_test(img, 20000, 31);
      if (mid.violations <= 0) ++control_misses;
    }

    bool ok = done == 20 && bad == 0 && control_misses == 0;
    return std::make_pair(
        ok, fmt("%d/20 certified instances clean (%d attempts), control misses "
                "%d%s",
                done - bad, attempts, control_misses, note.c_str()));
  });

  // 9. Weak duality across the corpus, certified or not.  Runtime rides on
  //    the solve criteria; no separate budget.
  gate.run(9, 0.0, "weak duality", [&] {
    Rng rng(5150);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    {
      auto p = problem_at(1.2);
      auto sol = optim::global_solve(p);
      gaps.emplace_back("worked r=1.2", optim::duality_gap(p, sol).gap);
    }
    for (int k = 0; k < 6; ++k) {
      double l1 = 0.5 + 1.5 * unif(rng), l2 = 0.5 + 1.5 * unif(rng);
      double th = 2.0 * M_PI * unif(rng);
      Mat R(2, 2);
      R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      geometry::QuadraticFunction obj;
      obj.A = R * Eigen::DiagonalMatrix<double, 2>(l1, l2) * R.transpose();
      obj.A = 0.5 * (obj.A + obj.A.transpose()).eval();
      obj.b = vec2(2.0 * unif(rng) - 1.0, 2.0 * unif(rng) - 1.0);
      obj.c = 0.0;

      double rc = 0.7 + 0.6 * unif(rng);
      geometry::QuadraticFunction g;
      g.A = 2.0 * Mat::Identity(2, 2);
      g.b = Vec::Zero(2);
      g.c = -rc * rc;
      auto con = calculus::SmoothMapSpec::quadratic({g});

      Vec center = vec2(0.6 * unif(rng) - 0.3, 0.6 * unif(rng) - 0.3);
      double rs = 0.6 + 0.6 * unif(rng);
      auto set = geometry::ConvexSetSpec::pnorm_ball(center, rs, 2.0);
      auto target = optim::TargetSpec::cone(ConeSpec::all(ConeRel::le0, 1));
      auto p = optim::ProblemSpec::create(
          calculus::SmoothMapSpec::quadratic({obj}), con, set, target, center);

      auto sol = optim::global_solve(
          p, {.samples = 1024, .seed = std::uint64_t(99 + k)});
      auto gap = optim::duality_gap(
          p, sol,
          {.grid = 17, .inner_samples = 512, .seed = std::uint64_t(7 + k)});
      gaps.emplace_back(fmt("random %d", k), gap.gap);
    }

    double worst = kInf;
    std::string worst_name;
    for (const auto& [name, g] : gaps)
      if (g < worst) {
        worst = g;
        worst_name = name;
      }
    bool ok = worst >= -1e-9;
    return std::make_pair(ok, fmt("%zu instances, worst gap %.2e (%s) >= -1e-9",
                                  gaps.size(), worst, worst_name.c_str()));
  });

  std::printf("acceptance: %d/9 criteria passed\n", 9 - gate.failures);
  return gate.failures;
}
