#include "uniconv/problem_io.hpp"

#include <functional>

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "uniconv/optim.hpp"
#include "uniconv/report.hpp"

using namespace uniconv;
using Catch::Approx;

namespace {

const char* kWorked = R"(# worked instance
space
  dim 2
  norm 2

objective
  A 2 0 0 -2
  b 0 0
  c 0

constraint
  component
    A 2 0 0 2
    b 0 0
    c -1
  target singleton 0

set
  kind ball
  center 0.70710678118654752 0.70710678118654752
  radius 0.5
  p 2

point
  x0 0.70710678118654752 0.70710678118654752

options
  tol 1e-6
  seed 2026
  samples 4096
  grid 33
  cells 96
)";

bool docs_equal(const io::ProblemDocument& a, const io::ProblemDocument& b) {
  auto quad_eq = [](const geometry::QuadraticFunction& x,
                    const geometry::QuadraticFunction& y) {
    return x.A == y.A && x.b == y.b && x.c == y.c;
  };
  if (a.dim != b.dim || a.norm_p != b.norm_p) return false;
  if (!quad_eq(a.objective, b.objective)) return false;
  if (a.constraints.size() != b.constraints.size()) return false;
  for (std::size_t i = 0; i < a.constraints.size(); ++i)
    if (!quad_eq(a.constraints[i], b.constraints[i])) return false;
  if (a.target_kind != b.target_kind) return false;
  if (a.target_kind == io::TargetKind::singleton &&
      a.target_point != b.target_point)
    return false;
  if (a.target_rels != b.target_rels) return false;
  if (a.set.kind != b.set.kind || a.set.radius != b.set.radius ||
      a.set.p != b.set.p || a.set.centers.size() != b.set.centers.size())
    return false;
  for (std::size_t i = 0; i < a.set.centers.size(); ++i)
    if (a.set.centers[i] != b.set.centers[i]) return false;
  if (a.set.kind == "sublevel" &&
      (!quad_eq(a.set.phi, b.set.phi) || a.set.alpha != b.set.alpha ||
       a.set.kappa != b.set.kappa || a.set.power != b.set.power ||
       a.set.lip != b.set.lip))
    return false;
  if (a.x0 != b.x0) return false;
  return a.options.tol == b.options.tol && a.options.seed == b.options.seed &&
         a.options.samples == b.options.samples &&
         a.options.grid == b.options.grid && a.options.cells == b.options.cells;
}

errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return errc::parse_error;
}

}  // namespace

TEST_CASE("worked instance parses into the expected problem", "[io]") {
  auto doc = io::parse_problem(kWorked);
  REQUIRE(doc.dim == 2);
  REQUIRE(doc.norm_p == 2.0);
  REQUIRE(doc.objective.A(0, 0) == 2.0);
  REQUIRE(doc.objective.A(1, 1) == -2.0);
  REQUIRE(doc.constraints.size() == 1);
  REQUIRE(doc.constraints[0].c == -1.0);
  REQUIRE(doc.target_kind == io::TargetKind::singleton);
  REQUIRE(doc.target_point.size() == 1);
  REQUIRE(doc.target_point[0] == 0.0);
  REQUIRE(doc.set.kind == "ball");
  REQUIRE(doc.set.radius == 0.5);
  REQUIRE(doc.x0[0] == Approx(oracle::x0_coord).margin(1e-16));
  REQUIRE(doc.options.seed == 2026);
  REQUIRE(doc.options.cells == 96);

  auto p = doc.to_problem();
  REQUIRE(p.dim() == 2);
  REQUIRE(p.constraint_dim() == 1);
  REQUIRE(optim::phi_value(p, testsupport::vec2(1.0, 0.0)) == Approx(1.0));
  REQUIRE(eval_map(p.constraint, testsupport::vec2(1.0, 0.0))[0] ==
          Approx(0.0).margin(1e-15));
  REQUIRE(p.set.margin(doc.x0) == Approx(0.5));  // x0 is the ball center
}

TEST_CASE("shipped problem file matches the inline worked instance", "[io]") {
  auto shipped = io::load_problem("problems/example_s4.problem");
  auto inlined = io::parse_problem(kWorked);
  REQUIRE(docs_equal(shipped, inlined));
}

TEST_CASE("parse -> serialize -> parse is the identity", "[io]") {
  auto doc = io::parse_problem(kWorked);
  auto text = io::serialize_problem(doc);
  auto doc2 = io::parse_problem(text);
  REQUIRE(docs_equal(doc, doc2));
  // And the serializer is a fixed point from then on.
  REQUIRE(io::serialize_problem(doc2) == text);

  // Cone targets and lens sets round-trip as well.
  auto doc3 = io::parse_problem(R"(
space
  dim 2
  norm 2
objective
  A 1 0 0 1
  b -1 0.5
  c 0.25
constraint
  component
    A 2 0 0 0
    b 0 1
    c -0.75
  component
    A 0 0 0 2
    b 1 0
    c -0.5
  target cone le0 eq0
set
  kind lens
  center -0.25 0
  center 0.25 0
  radius 1
point
  x0 0 0
)");
  auto doc4 = io::parse_problem(io::serialize_problem(doc3));
  REQUIRE(docs_equal(doc3, doc4));
  REQUIRE(doc4.target_rels ==
          std::vector<ConeRel>{ConeRel::le0, ConeRel::eq0});
  REQUIRE(doc4.set.centers.size() == 2);

  auto doc5 = io::parse_problem(R"(
space
  dim 2
objective
  b 1 1
set
  kind sublevel
  A 2 0 0 2
  b 0 0
  c 0
  alpha 1
  kappa 0.5
  power 2
  lip 4
point
  x0 0 0
)");
  REQUIRE(docs_equal(doc5, io::parse_problem(io::serialize_problem(doc5))));
  REQUIRE(doc5.constraints.empty());
}

TEST_CASE("empty constraint section yields an unconstrained problem", "[io]") {
  auto doc = io::parse_problem(R"(
space
  dim 2
objective
  A 2 0 0 2
set
  kind ball
  center 0 0
  radius 1
point
  x0 0.1 0.2
)");
  REQUIRE(doc.constraints.empty());
  REQUIRE(doc.target_kind == io::TargetKind::none);
  auto p = doc.to_problem();
  // Identity constraint into the all-free cone: always feasible.
  REQUIRE(p.constraint_dim() == 2);
  REQUIRE(p.target.distance(testsupport::vec2(3.0, -4.0)) == 0.0);
  auto sol = optim::global_solve(p, {.samples = 512});
  REQUIRE(sol.value == Approx(0.0).margin(1e-10));  // min of |x|^2-ish at 0
}

TEST_CASE("parse errors carry their line and distinct codes", "[io]") {
  // Unknown key inside a section names its line.
  try {
    io::parse_problem("space\n  dim 2\n  wobble 3\n");
    FAIL("expected parse error");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::parse_error);
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }

  REQUIRE(code_of([] {
            io::parse_problem("space\n  dim 2\nobjective\n  A 1 2 3\n");
          }) == errc::parse_error);  // wrong entry count
  REQUIRE(code_of([] {
            io::parse_problem("objective\n  A 1 0 0 1\n");
          }) == errc::parse_error);  // space must come first
  REQUIRE(code_of([] { io::parse_problem("space\n  dim 2\n"); }) ==
          errc::parse_error);  // missing point
  REQUIRE(code_of([] {
            io::parse_problem("space\n  dim 2\n  norm two\n");
          }) == errc::parse_error);  // bad number

  // Asymmetric matrices name the offending component.
  try {
    io::parse_problem(
        "space\n  dim 2\nobjective\n  A 1 1 0 1\nset\n  kind ball\n"
        "  center 0 0\n  radius 1\npoint\n  x0 0 0\n");
    FAIL("expected asymmetric matrix error");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::asymmetric_matrix);
    REQUIRE(std::string(e.what()).find("objective") != std::string::npos);
  }
  try {
    io::parse_problem(
        "space\n  dim 2\nconstraint\n  component\n    A 1 1 0 1\n"
        "set\n  kind ball\n  center 0 0\n  radius 1\npoint\n  x0 0 0\n");
    FAIL("expected asymmetric matrix error");
  } catch (const Error& e) {
    REQUIRE(e.code() == errc::asymmetric_matrix);
    REQUIRE(std::string(e.what()).find("component 1") != std::string::npos);
  }

  REQUIRE(code_of([] {
            io::parse_problem(
                "space\n  dim 2\nset\n  kind blob\n  center 0 0\n"
                "  radius 1\npoint\n  x0 0 0\n");
          }) == errc::unknown_set_kind);
  REQUIRE(code_of([] {
            io::parse_problem(
                "space\n  dim 2\nconstraint\n  component\n"
                "  target singleton 0 0\nset\n  kind ball\n  center 0 0\n"
                "  radius 1\npoint\n  x0 0 0\n");
          }) == errc::dimension_mismatch);  // target dim != components
  REQUIRE(code_of([] { io::load_problem("problems/nope.problem"); }) ==
          errc::parse_error);
}

TEST_CASE("radius override rewrites ball and lens radii only", "[io]") {
  auto doc = io::parse_problem(kWorked);
  io::override_radius(doc, 0.9);
  REQUIRE(doc.set.radius == 0.9);
  REQUIRE_THROWS_AS(io::override_radius(doc, -1.0), Error);

  auto sub = io::parse_problem(R"(
space
  dim 2
objective
  b 1 0
set
  kind sublevel
  A 2 0 0 2
  alpha 1
point
  x0 0 0
)");
  REQUIRE_THROWS_AS(io::override_radius(sub, 0.5), Error);
}

TEST_CASE("reports render deterministically in both formats", "[io]") {
  report::Doc d;
  d["alpha"] = report::num(1.5);
  d["beta"] = report::num(kInf);
  d["gamma"] = report::num(kNaN);
  d["nested"] = report::Doc{{"flag", true}, {"word", "steady"}};
  report::Doc arr = report::Doc::array();
  arr.push_back(report::num(0.25));
  arr.push_back(report::num(-kInf));
  d["list"] = arr;

  const std::string text = report::render(d, "text");
  REQUIRE(text ==
          "alpha: 1.5\n"
          "beta: inf\n"
          "gamma: nan\n"
          "nested:\n"
          "  flag: true\n"
          "  word: steady\n"
          "list: [0.25, -inf]\n");
  const std::string json = report::render(d, "json");
  REQUIRE(json.find("\"beta\": \"inf\"") != std::string::npos);
  REQUIRE(report::render(d, "text") == text);  // stable across calls
  REQUIRE_THROWS_AS(report::render(d, "yaml"), Error);
}
