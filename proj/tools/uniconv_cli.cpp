// uniconv: certify uniform convexity of nonlinear images and exploit the
// certificate — global solves, multipliers, duality gaps, raster diagnostics.
//
// Subcommands: certify | image-check | solve | gap | all.
// Exit codes: 0 ok, 2 parse/usage, 3 not certified, 4 infeasible,
// 5 verification failure.

#include <chrono>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uniconv/certify.hpp"
#include "uniconv/imagecheck.hpp"
#include "uniconv/optim.hpp"
#include "uniconv/problem_io.hpp"
#include "uniconv/report.hpp"

namespace {

using namespace uniconv;
using report::Doc;
using report::num;

constexpr const char* kVersion = "0.1.0";

struct Flags {
  std::string file;
  std::optional<double> radius;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> cells;
  std::string out;
  std::string format = "text";
  std::string csv;
  std::string pbm;
};

int exit_code_for(errc code) {
  switch (code) {
    case errc::parse_error:
    case errc::dimension_mismatch:
    case errc::asymmetric_matrix:
    case errc::unknown_set_kind:
    case errc::invalid_parameter:
    case errc::unsupported:
    case errc::not_onto:
      return 2;
    case errc::not_certified:
      return 3;
    case errc::infeasible:
      return 4;
    case errc::region_violation:
    case errc::verification_failure:
      return 5;
  }
  return 5;
}

struct Context {
  io::ProblemDocument doc;
  optim::ProblemSpec problem;
  optim::ImageSpace isa;
};

Context make_context(const Flags& f) {
  io::ProblemDocument doc = io::load_problem(f.file);
  if (f.radius) io::override_radius(doc, *f.radius);
  if (f.tol) doc.options.tol = *f.tol;
  if (f.seed) doc.options.seed = *f.seed;
  if (f.samples) doc.options.samples = *f.samples;
  if (f.cells) doc.options.cells = *f.cells;
  auto problem = doc.to_problem();
  auto isa = optim::build_image_map(problem);
  return Context{std::move(doc), std::move(problem), std::move(isa)};
}

Doc vec_doc(const Vec& v) {
  Doc a = Doc::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

certify::Certificate run_certify(const Context& ctx) {
  certify::CertifyOptions copts;
  copts.samples = ctx.doc.options.samples;
  copts.seed = ctx.doc.options.seed;
  const double r0 =
      certify::containment_radius(ctx.problem.set, ctx.problem.x0);
  return certify::certify_problem(ctx.isa.map, ctx.problem.set, ctx.problem.x0,
                                  r0, copts);
}

Doc certificate_doc(const Context& ctx, const certify::Certificate& cert) {
  Doc d;
  d["certified"] = cert.certified;
  d["c"] = num(cert.c);
  d["reg"] = num(cert.reg);
  d["lip"] = num(cert.lip);
  d["condition_lhs"] = num(cert.condition_lhs);
  d["slack"] = num(cert.slack);
  d["rho"] = num(cert.rho);
  d["eta"] = num(cert.eta);
  d["beta"] = num(cert.beta);
  d["sigma"] = num(cert.sigma);
  d["image_modulus_constant"] = num(cert.image_modulus_constant);
  if (ctx.doc.set.kind == "ball" && ctx.doc.set.p == 2.0 &&
      std::isfinite(cert.reg)) {
    // Euclidean balls of radius r have c = (1/8) / r.
    calculus::RegularityBound rb;
    rb.value = cert.reg;
    rb.surjective = true;
    calculus::LipschitzBound lb;
    lb.value = cert.lip;
    d["admissible_radius"] = num(certify::admissible_radius(0.125, rb, lb));
  }
  if (!cert.certified) d["reason"] = cert.reason;
  return d;
}

struct ImageOutcome {
  Doc doc;
  bool ok = false;
};

ImageOutcome run_image_check(const Context& ctx,
                             const std::optional<certify::Certificate>& cert,
                             const Flags& f) {
  const auto& opts = ctx.doc.options;
  if (ctx.isa.map.output_dim() != 2)
    throw Error(errc::unsupported,
                "raster diagnostics need exactly one constraint component");

  // Pilot pass fixes the cell size from the sampled image extent.
  double lo0 = kInf, hi0 = -kInf, lo1 = kInf, hi1 = -kInf;
  for (const Vec& x :
       geometry::sample_points(ctx.problem.set, 512, opts.seed)) {
    const Vec y = eval_map(ctx.isa.map, x);
    lo0 = std::min(lo0, y[0]);
    hi0 = std::max(hi0, y[0]);
    lo1 = std::min(lo1, y[1]);
    hi1 = std::max(hi1, y[1]);
  }
  const double extent = std::max({hi0 - lo0, hi1 - lo1, 1e-9});
  const double h = 1.3 * extent / std::max(8, opts.cells);

  const auto img =
      imagecheck::rasterize_image(ctx.isa.map, ctx.problem.set, h, 8.0,
                                  opts.seed);
  const auto mid = imagecheck::midpoint_convexity_test(
      img, std::max(4000, opts.samples), opts.seed);

  // Chord grid scaled to the occupied extent.
  int ilo = img.nx, ihi = -1, jlo = img.ny, jhi = -1;
  for (int j = 0; j < img.ny; ++j)
    for (int i = 0; i < img.nx; ++i)
      if (img.marked[img.index(i, j)]) {
        ilo = std::min(ilo, i);
        ihi = std::max(ihi, i);
        jlo = std::min(jlo, j);
        jhi = std::max(jhi, j);
      }
  const double diag = img.h * std::hypot(double(ihi - ilo + 1),
                                         double(jhi - jlo + 1));
  // Chords below ~0.3 diag produce inball radii near the cell size, where
  // the raster read clamps delta to zero and poisons the fitted constant.
  const double eps_grid[] = {0.3 * diag, 0.4 * diag, 0.5 * diag, 0.6 * diag};
  const auto fit = imagecheck::empirical_image_modulus(
      img, eps_grid, std::max(256, opts.samples / 8), opts.seed);
  const auto conv = imagecheck::convex_like_check(
      ctx.isa.map, ctx.problem.set, ctx.isa.q_cone,
      std::max(512, opts.samples / 4), img, opts.seed);

  if (!f.csv.empty()) imagecheck::write_modulus_csv(fit, f.csv);
  if (!f.pbm.empty()) imagecheck::write_pbm(img, f.pbm);

  ImageOutcome out;
  Doc& d = out.doc;
  d["cells_x"] = img.nx;
  d["cells_y"] = img.ny;
  d["cell_size"] = num(img.h);
  d["marked_cells"] = img.marked_count;
  d["samples_used"] = static_cast<std::int64_t>(img.samples_used);
  d["midpoint"] = Doc{{"pairs", mid.pairs},
                      {"violations", mid.violations},
                      {"ok", mid.ok}};
  d["convex_like"] = Doc{{"checked", conv.checked},
                         {"violations", conv.violations},
                         {"ok", conv.ok}};
  Doc curve = Doc::array();
  for (const auto& pt : fit.curve) {
    const double ratio = pt.delta / (pt.epsilon * pt.epsilon);
    curve.push_back(Doc{{"epsilon", num(pt.epsilon)},
                        {"delta", num(pt.delta)},
                        {"ratio", num(ratio)},
                        {"pairs", pt.pairs}});
  }
  d["modulus"] = Doc{{"c_hat", num(fit.c_hat)}, {"curve", curve}};
  out.ok = mid.ok && conv.ok;
  if (cert && cert->certified) {
    // Raster floor: delta is read to +-1.5 cells, so c degrades by at most
    // 1.5h / eps_min^2 over the chord grid.
    const double tol_raster = 1.5 * img.h / (eps_grid[0] * eps_grid[0]);
    const bool c_ok =
        fit.c_hat >= cert->image_modulus_constant - tol_raster;
    d["certificate_floor"] =
        Doc{{"image_modulus_constant", num(cert->image_modulus_constant)},
            {"raster_tolerance", num(tol_raster)},
            {"ok", c_ok}};
    out.ok = out.ok && c_ok;
  }
  if (!f.csv.empty()) d["csv"] = f.csv;
  if (!f.pbm.empty()) d["pbm"] = f.pbm;
  return out;
}

struct SolveOutcome {
  Doc doc;
  optim::SolveResult solution;
};

SolveOutcome run_solve(const Context& ctx,
                       const std::optional<certify::Certificate>& cert) {
  const auto& opts = ctx.doc.options;
  optim::SolveOptions sopts;
  sopts.tol = opts.tol;
  sopts.samples = opts.samples;
  sopts.seed = opts.seed;
  auto sol = optim::global_solve(ctx.problem, sopts);

  optim::MultiplierOptions mopts;
  mopts.tol = std::max(opts.tol, 1e-9);
  mopts.grid = opts.grid;
  mopts.inner_samples = std::max(256, opts.samples / 4);
  mopts.seed = opts.seed;
  auto mul = optim::find_multiplier(ctx.problem, sol.x, mopts);

  SolveOutcome out;
  out.solution = sol;
  Doc& d = out.doc;
  if (cert) d["certified"] = cert->certified;
  d["x_bar"] = vec_doc(sol.x);
  d["phi_value"] = num(sol.value);
  d["boundary_distance"] = num(sol.boundary_margin);
  d["constraint_distance"] = num(sol.constraint_dist);
  d["feasible_candidates"] = sol.feasible_candidates;
  d["multiplier"] = Doc{{"found", mul.found},
                        {"y", vec_doc(mul.y)},
                        {"residual", num(mul.residual)},
                        {"cap_exhausted", mul.cap_exhausted}};
  d["lagrangian_min_ok"] = mul.found;
  if (mul.found) {
    auto sp = optim::saddle_check(ctx.problem, sol.x, mul.y, 512,
                                  std::max(opts.tol, 1e-6), opts.seed);
    d["saddle"] = Doc{{"ok", sp.ok},
                      {"worst_left", num(sp.worst_left)},
                      {"worst_right", num(sp.worst_right)}};
  } else {
    d["saddle"] = Doc{{"ok", false}, {"skipped", "no multiplier found"}};
  }
  const double radii[] = {0.1, 0.01};
  auto ic = optim::interior_nonoptimality_check(ctx.problem, radii, sopts);
  Doc icd;
  icd["ran"] = ic.ran;
  icd["ok"] = ic.ok;
  if (!ic.ran) icd["skipped"] = ic.skip_reason;
  d["interior_nonoptimality"] = icd;
  return out;
}

Doc run_gap(const Context& ctx, const optim::SolveResult& sol) {
  const auto& opts = ctx.doc.options;
  optim::GapOptions gopts;
  gopts.grid = opts.grid;
  gopts.inner_samples = std::max(256, opts.samples / 4);
  gopts.seed = opts.seed;
  auto gap = optim::duality_gap(ctx.problem, sol, gopts);
  Doc d;
  d["primal"] = num(gap.primal);
  d["dual"] = num(gap.dual);
  d["gap"] = num(gap.gap);
  d["truncated"] = gap.truncated;
  d["y"] = vec_doc(gap.y);
  return d;
}

int run_command(const std::string& cmd, const Flags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx = make_context(f);

  Doc doc;
  doc["command"] = cmd;
  doc["problem"] = Doc{{"file", f.file},
                       {"dim", ctx.doc.dim},
                       {"set_kind", ctx.doc.set.kind},
                       {"radius", num(ctx.doc.set.radius)},
                       {"x0", vec_doc(ctx.doc.x0)}};

  int exit_code = 0;
  std::optional<certify::Certificate> cert;

  const bool want_certify = cmd == "certify" || cmd == "all";
  const bool want_image = cmd == "image-check" || cmd == "all";
  const bool want_solve = cmd == "solve" || cmd == "gap" || cmd == "all";
  const bool want_gap = cmd == "gap" || cmd == "all";

  if (want_certify) {
    cert = run_certify(ctx);
    doc["certificate"] = certificate_doc(ctx, *cert);
    if (!cert->certified) exit_code = 3;
  } else if (want_image || want_solve) {
    // Context flag only: failures here just leave the run uncertified.
    try {
      cert = run_certify(ctx);
    } catch (const Error&) {
      cert.reset();
    }
  }

  if (want_image) {
    auto img = run_image_check(ctx, cert, f);
    doc["image_check"] = std::move(img.doc);
    if (!img.ok && exit_code == 0) exit_code = 5;
  }

  if (want_solve) {
    auto sol = run_solve(ctx, cert);
    doc["solve"] = std::move(sol.doc);
    if (want_gap) doc["gap"] = run_gap(ctx, sol.solution);
  }

  const auto& opts = ctx.doc.options;
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  doc["provenance"] = Doc{{"version", kVersion},
                          {"seed", opts.seed},
                          {"samples", opts.samples},
                          {"grid", opts.grid},
                          {"cells", opts.cells},
                          {"tol", num(opts.tol)},
                          {"elapsed_ms", elapsed}};
  doc["status"] = Doc{{"exit_code", exit_code}, {"ok", exit_code == 0}};

  report::write_report(doc, f.format, f.out, std::cout);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uniform convexity certificates for nonlinear images"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&f](CLI::App* s) {
    s->add_option("file", f.file, "problem file")->required();
    s->add_option("--radius", f.radius, "override the set radius");
    s->add_option("--seed", f.seed, "sampling seed");
    s->add_option("--cells", f.cells, "raster cells across the image");
    s->add_option("--samples", f.samples, "sample budget");
    s->add_option("--tol", f.tol, "tolerance");
    s->add_option("--out", f.out, "write the report to this path");
    s->add_option("--format", f.format, "report format")
        ->check(CLI::IsMember({"text", "json"}));
    return s;
  };
  add_common(app.add_subcommand("certify", "check the certificate condition"));
  auto* img = add_common(
      app.add_subcommand("image-check", "raster diagnostics of the image"));
  img->add_option("--csv", f.csv, "write the modulus curve as CSV");
  img->add_option("--pbm", f.pbm, "write the raster as PBM");
  add_common(app.add_subcommand("solve", "global solve with verification"));
  add_common(app.add_subcommand("gap", "duality gap at the global solution"));
  auto* all = add_common(
      app.add_subcommand("all", "certify, image-check, solve and gap"));
  all->add_option("--csv", f.csv, "write the modulus curve as CSV");
  all->add_option("--pbm", f.pbm, "write the raster as PBM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help/version exit 0, usage errors exit 2
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run_command(cmd, f);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  }
}
