#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "vppro/model.hpp"
#include "vppro/uncertainty.hpp"

using namespace vppro;

namespace {

// the five reference ratio intervals: [0,.25],[.25,.5],[.5,1],[1,4],[4,16]
ElasticityTable five_interval_table(int nodes = 1, int periods = 1) {
  ElasticityTable t(nodes, periods, 5);
  const double b[6] = {0, 0.25, 0.5, 1, 4, 16};
  for (int tt = 0; tt < periods; ++tt)
    for (int k = 0; k < 5; ++k) {
      t.interval(tt, k) = {b[k], b[k + 1]};
      for (int i = 0; i < nodes; ++i) t.xi(i, tt, k) = {-0.97, -0.11};
    }
  return t;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vppro_test_" + name);
}

}  // namespace

TEST_CASE("interval lookup over the five reference intervals") {
  const ElasticityTable t = five_interval_table();
  CHECK(interval_lookup(t, 0, 0.3) == 1);      // second interval (index 1)
  CHECK(interval_lookup(t, 0, 0.25) == 0);     // shared endpoint -> lower k
  CHECK(interval_lookup(t, 0, 1.0) == 2);
  CHECK(interval_lookup(t, 0, 16.0) == 4);
  CHECK_THROWS_AS(interval_lookup(t, 0, 20.0), OutOfCoverageError);
  CHECK_THROWS_AS(interval_lookup(t, 0, -0.5), OutOfCoverageError);
}

TEST_CASE("interval candidates near shared endpoints") {
  const ElasticityTable t = five_interval_table();
  CHECK(interval_candidates(t, 0, 0.3, 1e-6) == std::vector<int>{1});
  CHECK(interval_candidates(t, 0, 0.5, 1e-6) == std::vector<int>{1, 2});
  CHECK(interval_candidates(t, 0, 0.5 + 1e-8, 1e-6) == std::vector<int>{1, 2});
  CHECK(interval_candidates(t, 0, 16.0, 1e-6) == std::vector<int>{4});
}

TEST_CASE("vertex <-> scenario maps") {
  ElasticityTable t(1, 1, 1);
  t.interval(0, 0) = {0.5, 2.0};
  t.xi(0, 0, 0) = {-0.97, -0.11};
  const std::vector<int> z = {0};
  Mat v(1, 1);
  v.at(0, 0) = 1.0;
  CHECK(vertex_to_scenario(t, z, v).at(0, 0) == doctest::Approx(-0.11));
  v.at(0, 0) = 0.0;
  CHECK(vertex_to_scenario(t, z, v).at(0, 0) == doctest::Approx(-0.97));
  v.at(0, 0) = 0.5;
  CHECK(vertex_to_scenario(t, z, v).at(0, 0) == doctest::Approx(-0.54));

  Mat xi(1, 1);
  xi.at(0, 0) = -0.11;
  CHECK(scenario_to_vertex(t, z, xi).at(0, 0) == doctest::Approx(1.0));
  xi.at(0, 0) = -0.54;
  CHECK(scenario_to_vertex(t, z, xi).at(0, 0) == doctest::Approx(0.5));
  xi.at(0, 0) = 0.4;
  CHECK_THROWS_AS(scenario_to_vertex(t, z, xi), TableError);

  // degenerate interval tie rule
  ElasticityTable td(1, 1, 1);
  td.interval(0, 0) = {0.5, 2.0};
  td.xi(0, 0, 0) = {-0.5, -0.5};
  xi.at(0, 0) = -0.5;
  CHECK(scenario_to_vertex(td, z, xi).at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("round-trip property: scenario_to_vertex inverts vertex_to_scenario") {
  std::mt19937_64 rng(11);
  ElasticityTable t(3, 2, 2);
  for (int tt = 0; tt < 2; ++tt) {
    t.interval(tt, 0) = {0.5, 1.0};
    t.interval(tt, 1) = {1.0, 2.0};
    for (int i = 0; i < 3; ++i) {
      t.xi(i, tt, 0) = {-0.9, -0.2};
      t.xi(i, tt, 1) = {-0.4, -0.1};
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<int> z = {static_cast<int>(rng() % 2), static_cast<int>(rng() % 2)};
    Mat v(3, 2);
    for (double& x : v.data) x = std::generate_canonical<double, 53>(rng);
    const Mat back = scenario_to_vertex(t, z, vertex_to_scenario(t, z, v));
    for (size_t q = 0; q < v.data.size(); ++q)
      CHECK(back.data[q] == doctest::Approx(v.data[q]).epsilon(1e-12));
  }
}

TEST_CASE("scenario invariant checker") {
  ElasticityTable t = five_interval_table();
  Scenario s;
  s.z = {1};
  s.v = Mat(1, 1, 0.5);
  s.xi = vertex_to_scenario(t, s.z, s.v);
  CHECK(check_scenario(t, s).empty());
  s.xi.at(0, 0) = 5.0;
  CHECK(!check_scenario(t, s).empty());
  s.z = {9};
  CHECK(!check_scenario(t, s).empty());
}

TEST_CASE("set reformulation: adversary mode resolves z and reproduces the box") {
  const ElasticityTable t = five_interval_table();
  Model m;
  const auto ref = add_set_reformulation(m, t, {}, {0.03}, {0.1}, ReformMode::adversary);
  // ratio 0.3 -> interval index 1 resolved as a constant
  REQUIRE(ref.z[0].size() == 5);
  CHECK(!ref.z[0][1].is_var);
  CHECK(ref.z[0][1].fixed == doctest::Approx(1.0));
  // LP probing both coordinates of the feasible xi region gives the box
  m.set_objective(LinExpr(ref.xi[0]), false);
  const SolveResult lo = m.solve();
  REQUIRE(lo.status == SolveStatus::optimal);
  CHECK(lo.objective == doctest::Approx(-0.97));
  m.set_objective(LinExpr(ref.xi[0]), true);
  const SolveResult hi = m.solve();
  CHECK(hi.objective == doctest::Approx(-0.11));
}

TEST_CASE("set reformulation: master mode is infeasible outside the coverage") {
  ElasticityTable t(1, 1, 2);
  t.interval(0, 0) = {0.5, 1.0};
  t.interval(0, 1) = {1.0, 2.0};
  t.xi(0, 0, 0) = {-0.5, -0.1};
  t.xi(0, 0, 1) = {-0.3, -0.1};
  Model m;
  const VarRef c = m.add_continuous(0.30, 0.30);  // ratio 3.0 with cref 0.1: uncovered
  const auto ref = add_set_reformulation(m, t, {c}, {}, {0.1}, ReformMode::master);
  m.set_objective(LinExpr(ref.xi[0]), false);
  CHECK(m.solve().status == SolveStatus::infeasible);

  Model m2;
  const VarRef c2 = m2.add_continuous(0.15, 0.15);  // ratio 1.5 -> k=1
  const auto ref2 = add_set_reformulation(m2, t, {c2}, {}, {0.1}, ReformMode::master);
  m2.set_objective(LinExpr(ref2.xi[0]), false);
  const SolveResult res = m2.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(-0.3));
  CHECK(res.value(ref2.z[0][1].var) == doctest::Approx(1.0));
}

TEST_CASE("set reformulation: K=1 degenerates to a decision-independent box") {
  ElasticityTable t(1, 1, 1);
  t.interval(0, 0) = {0.5, 2.0};
  t.xi(0, 0, 0) = {-0.8, -0.2};
  Model m;
  const auto ref = add_set_reformulation(m, t, {}, {0.1}, {0.1}, ReformMode::adversary);
  CHECK(!ref.z[0][0].is_var);
  CHECK(ref.z[0][0].fixed == doctest::Approx(1.0));
  m.set_objective(LinExpr(ref.xi[0]), true);
  const SolveResult res = m.solve();
  CHECK(res.objective == doctest::Approx(-0.2));
}

TEST_CASE("budget constraints") {
  SUBCASE("gamma_s = 0 forces v to one half") {
    Model m;
    std::vector<VarRef> v = {m.add_continuous(0, 1), m.add_continuous(0, 1)};
    add_budget_constraints(m, v, 2, 1, {1.0, 0.0});
    m.set_objective(LinExpr(v[0]), true);
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(0.5));
    m.set_objective(LinExpr(v[0]), false);
    CHECK(m.solve().objective == doctest::Approx(0.5));
  }
  SUBCASE("I=2, gamma_s=1: max total deviation puts one component at an extreme") {
    Model m;
    std::vector<VarRef> v = {m.add_continuous(0, 1), m.add_continuous(0, 1)};
    const BudgetHandles b = add_budget_constraints(m, v, 2, 1, {1.0, 1.0});
    LinExpr total;
    for (const VarRef& u : b.u) total += LinExpr(u);
    m.set_objective(total, true);
    const SolveResult res = m.solve();
    REQUIRE(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(1.0));
    const double u0 = res.value(b.u[0]), u1 = res.value(b.u[1]);
    CHECK(u0 + u1 == doctest::Approx(1.0));
  }
  SUBCASE("slack budgets never bind") {
    Model m;
    std::vector<VarRef> v = {m.add_continuous(0, 1), m.add_continuous(0, 1)};
    add_budget_constraints(m, v, 2, 1, {1.0, 2.0});
    m.add_constraint(Sense::eq, LinExpr(v[0]), 1.0, "pin0");
    m.add_constraint(Sense::eq, LinExpr(v[1]), 0.0, "pin1");
    m.set_objective(LinExpr(0.0));
    CHECK(m.solve().status == SolveStatus::optimal);
  }
  SUBCASE("two extremes violate gamma_s=1") {
    Model m;
    std::vector<VarRef> v = {m.add_continuous(0, 1), m.add_continuous(0, 1)};
    add_budget_constraints(m, v, 2, 1, {1.0, 1.0});
    m.add_constraint(Sense::eq, LinExpr(v[0]), 1.0, "pin0");
    m.add_constraint(Sense::eq, LinExpr(v[1]), 0.0, "pin1");
    m.set_objective(LinExpr(0.0));
    CHECK(m.solve().status == SolveStatus::infeasible);
  }
}

TEST_CASE("CSV parsing") {
  const auto path = temp_file("table.csv");
  SUBCASE("node-based round trip") {
    ElasticityTable t = five_interval_table(2, 1);
    t.to_csv(path.string());
    const ElasticityTable back = ElasticityTable::from_csv(path.string(), 2, 1);
    CHECK(back.num_intervals() == 5);
    CHECK(back.interval(0, 3).r_hi == doctest::Approx(4.0));
    CHECK(back.xi(1, 0, 2).lo == doctest::Approx(-0.97));
  }
  SUBCASE("missing column is named in the diagnostic") {
    std::ofstream out(path);
    out << "node,t,k,r_lo,r_hi,xi_lo\n0,0,0,0.5,2.0,-0.5\n";
    out.close();
    try {
      ElasticityTable::from_csv(path.string(), 1, 1);
      FAIL("expected TableError");
    } catch (const TableError& e) {
      CHECK(std::string(e.what()).find("xi_hi") != std::string::npos);
    }
  }
  SUBCASE("class-based shorthand with node map") {
    const auto map_path = temp_file("classes.csv");
    {
      std::ofstream out(path);
      out << "class,t,k,r_lo,r_hi,xi_lo,xi_hi\n";
      out << "high,0,0,0.5,1.0,-0.9,-0.2\nhigh,0,1,1.0,2.0,-0.4,-0.1\n";
      out << "low,0,0,0.5,1.0,-0.3,-0.05\nlow,0,1,1.0,2.0,-0.15,-0.02\n";
    }
    {
      std::ofstream out(map_path);
      out << "node,class\n0,low\n1,high\n2,low\n";
    }
    const ElasticityTable t =
        ElasticityTable::from_csv(path.string(), 3, 1, map_path.string());
    CHECK(t.xi(1, 0, 0).lo == doctest::Approx(-0.9));
    CHECK(t.xi(2, 0, 1).hi == doctest::Approx(-0.02));
    // class-based file without a map is an input error
    CHECK_THROWS_AS(ElasticityTable::from_csv(path.string(), 3, 1), TableError);
  }
  SUBCASE("non-contiguous intervals rejected") {
    std::ofstream out(path);
    out << "node,t,k,r_lo,r_hi,xi_lo,xi_hi\n";
    out << "0,0,0,0.5,1.0,-0.5,-0.1\n0,0,1,1.5,2.0,-0.3,-0.1\n";
    out.close();
    CHECK_THROWS_AS(ElasticityTable::from_csv(path.string(), 1, 1), TableError);
  }
}

TEST_CASE("selector uniqueness: one z per period within ratio bounds") {
  // any feasible (z, c) pair has exactly one selected interval containing c
  ElasticityTable t = five_interval_table();
  Model m;
  const VarRef c = m.add_continuous(0.005, 1.6);  // ratio in [0.05, 16]
  const auto ref = add_set_reformulation(m, t, {c}, {}, {0.1}, ReformMode::master);
  m.add_constraint(Sense::eq, LinExpr(c), 0.31, "pin");  // ratio 3.1 -> k=3
  m.set_objective(LinExpr(ref.xi[0]), false);
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  int ones = 0, sel = -1;
  for (int k = 0; k < 5; ++k)
    if (res.value(ref.z[0][k].var) > 0.5) {
      ++ones;
      sel = k;
    }
  CHECK(ones == 1);
  CHECK(sel == 3);
  CHECK(t.interval(0, sel).r_lo <= 3.1);
  CHECK(3.1 <= t.interval(0, sel).r_hi);
}
