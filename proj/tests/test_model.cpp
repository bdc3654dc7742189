#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

#include "vppro/backend.hpp"
#include "vppro/model.hpp"
#include "vppro/mps.hpp"

using namespace vppro;

TEST_CASE("variable bounds and kinds") {
  Model m;
  const VarRef x = m.add_variable(VarKind::continuous, 0, 5);
  CHECK(m.var_bounds(x) == std::pair<double, double>{0, 5});
  const VarRef b = m.add_binary();
  CHECK(m.var_bounds(b) == std::pair<double, double>{0, 1});
  CHECK(m.var_kind(b) == VarKind::binary);
  CHECK_THROWS_AS(m.add_variable(VarKind::continuous, 3, 1), InvalidBoundsError);
  CHECK_THROWS_AS(m.add_variable(VarKind::binary, -1, 1), InvalidBoundsError);
}

TEST_CASE("foreign variables are rejected") {
  Model m1, m2;
  const VarRef x = m1.add_continuous(0, 1);
  CHECK_THROWS_AS(m2.add_constraint(Sense::le, LinExpr(x), 1, "foreign"), ForeignVariableError);
}

TEST_CASE("constraints require provenance tags") {
  Model m;
  const VarRef x = m.add_continuous(0, 1);
  CHECK_THROWS_AS(m.add_constraint(Sense::le, LinExpr(x), 1, ""), ModelError);
}

TEST_CASE("LinExpr canonicalization merges duplicates and drops dust") {
  Model m;
  const VarRef x = m.add_continuous(0, 1);
  const VarRef y = m.add_continuous(0, 1);
  LinExpr e = LinExpr(x) * 2.0 + LinExpr(y) - LinExpr(x) * 2.0 + LinExpr(x) * 0.5;
  e.add(y, 1e-14);
  e.canonicalize();
  REQUIRE(e.terms().size() == 2);
  CHECK(e.terms()[0].second == doctest::Approx(0.5));
  CHECK(e.terms()[1].second == doctest::Approx(1.0));
}

TEST_CASE("tiny LP: min x st x >= 3") {
  Model m;
  const VarRef x = m.add_continuous(-kInf, kInf);
  const ConstraintRef row = m.add_constraint(Sense::ge, LinExpr(x), 3, "lb_row");
  m.set_objective(LinExpr(x));
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(3.0));
  CHECK(res.value(x) == doctest::Approx(3.0));
  REQUIRE(res.has_duals());
  CHECK(res.dual_of(row) == doctest::Approx(1.0));  // dObj/d(rhs)
  CHECK(res.clean());
}

TEST_CASE("infeasible pair reported") {
  Model m;
  const VarRef x = m.add_continuous(-kInf, kInf);
  m.add_constraint(Sense::le, LinExpr(x), 0, "ub");
  m.add_constraint(Sense::ge, LinExpr(x), 1, "lb");
  m.set_objective(LinExpr(x));
  CHECK(m.solve().status == SolveStatus::infeasible);
}

TEST_CASE("tiny MILP rounds binary up") {
  Model m;
  const VarRef x = m.add_binary();
  m.add_constraint(Sense::ge, LinExpr(x), 0.5, "half");
  m.set_objective(LinExpr(x));
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(1.0));
}

TEST_CASE("maximize sense round-trips through the minimize-only backend") {
  Model m;
  const VarRef x = m.add_continuous(0, 7);
  m.set_objective(LinExpr(x) + LinExpr(2.0), /*maximize=*/true);
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(9.0));
}

TEST_CASE("complementarity forces the inactive side to zero") {
  // min dual + slack_var with slack = slack_var fixed by a row
  SUBCASE("slack positive forces dual to zero") {
    Model m;
    const VarRef dual = m.add_continuous(0, kInf);
    const VarRef s = m.add_continuous(-kInf, kInf);
    m.add_constraint(Sense::eq, LinExpr(s), 3, "fix_s");
    m.add_complementarity(dual, LinExpr(s), "pair");
    m.set_objective(LinExpr(dual) * -1.0, true);  // try to push dual up
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.value(dual) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(res.clean());
  }
  SUBCASE("dual positive forces slack to zero") {
    Model m;
    const VarRef dual = m.add_continuous(0, kInf);
    const VarRef s = m.add_continuous(0, kInf);
    m.add_constraint(Sense::ge, LinExpr(dual), 2, "fix_dual");
    m.add_complementarity(dual, LinExpr(s), "pair");
    m.set_objective(LinExpr(s) * -1.0 + LinExpr(dual), false);  // push s up
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.value(s) == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("big-M audit flags duals at the cap") {
  SolverOptions opts;
  opts.big_M = 10.0;
  Model m(opts);
  const VarRef dual = m.add_continuous(0, kInf);
  const VarRef s = m.add_continuous(0, kInf);
  m.add_constraint(Sense::ge, LinExpr(dual), 9.95, "force_dual_near_M");
  m.add_complementarity(dual, LinExpr(s), "pair");
  m.set_objective(LinExpr(dual) + LinExpr(s));
  const SolveResult res = m.solve(opts);
  REQUIRE(res.status == SolveStatus::optimal);
  bool flagged = false;
  for (const Diagnostic& d : res.diagnostics)
    if (d.kind == DiagnosticKind::big_m_violation) flagged = true;
  CHECK(flagged);
}

TEST_CASE("convex square constraint") {
  SUBCASE("z=1 pins omega to c^2 under minimization") {
    Model m;
    const VarRef c = m.add_continuous(0, 4);
    const VarRef omega = m.add_continuous(0, kInf);
    const VarRef z = m.add_binary();
    m.add_constraint(Sense::eq, LinExpr(z), 1, "fix_z");
    m.add_constraint(Sense::eq, LinExpr(c), 2, "fix_c");
    m.add_convex_square_leq(c, omega, z, "sq");
    m.set_objective(LinExpr(omega));
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.value(omega) == doctest::Approx(4.0).epsilon(1e-7));
  }
  SUBCASE("z=0 relaxes the constraint and omega drops to zero") {
    Model m;
    const VarRef c = m.add_continuous(0, 4);
    const VarRef omega = m.add_continuous(0, kInf);
    const VarRef z = m.add_binary();
    m.add_constraint(Sense::eq, LinExpr(z), 0, "fix_z");
    m.add_constraint(Sense::eq, LinExpr(c), 2, "fix_c");
    m.add_convex_square_leq(c, omega, z, "sq");
    m.set_objective(LinExpr(omega));
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.value(omega) == doctest::Approx(0.0));
  }
  SUBCASE("piecewise mode under-approximates by at most (width/2)^2") {
    SolverOptions opts;
    opts.quadratic_mode = QuadraticMode::piecewise_linear;
    opts.breakpoints = 3;  // tangents at 0, 2, 4: max gap (2/2)^2 = 1
    Model m(opts);
    const VarRef c = m.add_continuous(0, 4);
    const VarRef omega = m.add_continuous(0, kInf);
    m.add_constraint(Sense::eq, LinExpr(c), 3, "fix_c");  // between breakpoints
    m.add_convex_square_leq(c, omega, VarRef{}, "sq");
    m.set_objective(LinExpr(omega));
    const SolveResult res = m.solve(opts);
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.value(omega) <= 9.0 + 1e-9);
    CHECK(res.value(omega) >= 9.0 - 1.0 - 1e-9);
    // across the whole domain the bound never under-shoots by more than 1
    for (double cv : {0.5, 1.0, 1.5, 2.5, 3.5}) {
      double best = 0;
      for (double b : {0.0, 2.0, 4.0}) best = std::max(best, 2 * b * cv - b * b);
      CHECK(cv * cv - best <= 1.0 + 1e-12);
    }
  }
  SUBCASE("piecewise mode rejects unbounded domains") {
    SolverOptions opts;
    opts.quadratic_mode = QuadraticMode::piecewise_linear;
    Model m(opts);
    const VarRef c = m.add_continuous(-kInf, kInf);
    const VarRef omega = m.add_continuous(0, kInf);
    m.add_convex_square_leq(c, omega, VarRef{}, "sq");
    m.set_objective(LinExpr(omega));
    CHECK_THROWS_AS(m.solve(opts), ModelError);
  }
}

TEST_CASE("feasibility recheck accepts backend solutions on random LPs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    Model m;
    std::vector<VarRef> xs;
    const int n = 3 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i)
      xs.push_back(m.add_continuous(-5.0, 5.0 + static_cast<double>(rng() % 5)));
    LinExpr obj;
    for (int i = 0; i < n; ++i)
      obj += LinExpr(xs[i]) * (1.0 + static_cast<double>(rng() % 7));
    for (int r = 0; r < n; ++r) {
      LinExpr e;
      for (int i = 0; i < n; ++i)
        e += LinExpr(xs[i]) * (static_cast<double>(rng() % 9) - 4.0);
      m.add_constraint(rng() % 2 ? Sense::ge : Sense::le, std::move(e),
                       static_cast<double>(rng() % 10) - 3.0, "r" + std::to_string(r));
    }
    m.set_objective(std::move(obj));
    const SolveResult res = m.solve();  // recheck pass runs internally
    CHECK((res.status == SolveStatus::optimal || res.status == SolveStatus::infeasible ||
           res.status == SolveStatus::unbounded));
  }
}

TEST_CASE("MPS fallback adapter matches the pipe backend") {
  auto build = [](Model& m) {
    const VarRef x = m.add_continuous(0, 10);
    const VarRef y = m.add_continuous(-2, kInf);
    const VarRef b = m.add_binary();
    m.add_constraint(Sense::ge, LinExpr(x) + LinExpr(y) * 2.0 + LinExpr(b), 4, "r1");
    m.add_constraint(Sense::le, LinExpr(x) - LinExpr(y), 6, "r2");
    m.add_constraint(Sense::eq, LinExpr(y) + LinExpr(b) * 3.0, 2, "r3");
    m.set_objective(LinExpr(x) * 1.5 + LinExpr(y) + LinExpr(b) * 0.25 + LinExpr(1.0));
  };
  Model m1;
  build(m1);
  const SolveResult pipe_res = m1.solve();
  REQUIRE(pipe_res.status == SolveStatus::optimal);

  ::setenv("VPP_SOLVER_BACKEND", "mps", 1);
  Model m2;
  build(m2);
  const SolveResult mps_res = m2.solve();
  ::unsetenv("VPP_SOLVER_BACKEND");
  REQUIRE(mps_res.status == SolveStatus::optimal);
  CHECK(mps_res.objective == doctest::Approx(pipe_res.objective).epsilon(1e-7));
}

TEST_CASE("MPS writer round-trips bounds and senses") {
  Model m;
  const VarRef x = m.add_continuous(-kInf, kInf);
  const VarRef y = m.add_continuous(1.5, 1.5);
  m.add_constraint(Sense::ge, LinExpr(x) + LinExpr(y), 2, "g");
  m.set_objective(LinExpr(x) + LinExpr(y));
  const CompiledModel cm = m.compile(m.options());
  std::ostringstream os;
  write_free_mps(cm, os);
  const std::string text = os.str();
  CHECK(text.find("FR BND x0") != std::string::npos);
  CHECK(text.find("FX BND x1") != std::string::npos);
  CHECK(text.find(" G c0") != std::string::npos);
  CHECK(text.find("ENDATA") != std::string::npos);
}
