#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "vppro/instances.hpp"
#include "vppro/network.hpp"

using namespace vppro;

namespace {
constexpr double kPi = 3.14159265358979323846;

NetworkCase two_node_noload_gen_free() {
  Instance inst = micro1();
  NetworkCase net = inst.net;
  net.nodes[1].p_min = net.nodes[1].p_max = 0;  // drop the generator
  net.nodes[1].q_min = net.nodes[1].q_max = 0;
  return net;
}
}  // namespace

TEST_CASE("polygon half-planes: S=4 is the rotated square p+q <= s_max") {
  const auto hp = polygon_halfplanes(4, 1.0);
  REQUIRE(hp.size() == 4);
  // s=1: cos(pi/4)(p+q) <= cos(pi/4), i.e. p+q <= 1
  CHECK(hp[0].cos_coef == doctest::Approx(std::sqrt(0.5)));
  CHECK(hp[0].sin_coef == doctest::Approx(std::sqrt(0.5)));
  CHECK(hp[0].rhs == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(polygon_halfplanes(2, 1.0), CaseError);
}

TEST_CASE("polygon inner approximation: soundness and tightness") {
  std::mt19937_64 rng(7);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  for (int S : {3, 4, 16, 64}) {
    const double s_max = 2.5;
    const auto hp = polygon_halfplanes(S, s_max);
    auto inside = [&](double p, double q) {
      for (const Halfplane& h : hp)
        if (h.cos_coef * p + h.sin_coef * q > h.rhs + 1e-12) return false;
      return true;
    };
    int kept = 0;
    while (kept < 200) {  // polygon-feasible points stay in the disk
      const double p = uniform(-s_max, s_max), q = uniform(-s_max, s_max);
      if (!inside(p, q)) continue;
      ++kept;
      CHECK(p * p + q * q <= s_max * s_max + 1e-9);
    }
    const double inner = std::cos(kPi / S) * s_max;
    for (int trial = 0; trial < 200; ++trial) {  // the apothem disk is contained
      const double ang = uniform(0, 2 * kPi), r = inner * std::sqrt(uniform(0, 1));
      CHECK(inside(r * std::cos(ang), r * std::sin(ang)));
    }
    // circle points between vertices are cut off (radial shrinkage)
    const double mid = kPi / S;  // mid-facet direction
    CHECK_FALSE(inside(s_max * std::cos(mid), s_max * std::sin(mid)));
    CHECK_FALSE(inside(1.001 * inner * std::cos(mid), 1.001 * inner * std::sin(mid)));
  }
}

TEST_CASE("radiality validation") {
  NetworkCase net = micro1().net;
  SUBCASE("valid case passes") { CHECK_NOTHROW(net.validate()); }
  SUBCASE("line count must be nodes-1") {
    net.lines.clear();
    CHECK_THROWS_AS(net.validate(), CaseError);
  }
  SUBCASE("root cannot have a parent") {
    net.lines[0] = {1, 0, 0.01, 0.01, 10};
    CHECK_THROWS_AS(net.validate(), CaseError);
  }
  SUBCASE("price ordering violation is a warning, not an error") {
    net.prices.rho_dn[0] = 10.0;
    const auto warnings = net.validate();
    CHECK(!warnings.empty());
  }
}

TEST_CASE("case JSON round-trip preserves values and units") {
  const NetworkCase net = ieee33_case(4);
  const std::string text = net.to_json_text();
  const NetworkCase back = NetworkCase::from_json_text(text);
  REQUIRE(back.num_nodes() == 33);
  REQUIRE(back.periods == 4);
  CHECK(back.s_base_kva == doctest::Approx(1000.0));
  for (int i = 0; i < 33; ++i)
    for (int t = 0; t < 4; ++t)
      CHECK(back.nodes[i].load[t] == doctest::Approx(net.nodes[i].load[t]).epsilon(1e-12));
  CHECK(back.lines[5].s_max == doctest::Approx(net.lines[5].s_max));
  CHECK_THROWS_AS(NetworkCase::from_json_text("{not json", "bad"), CaseError);
  CHECK_THROWS_AS(NetworkCase::from_json_text("{\"periods\": 1}", "incomplete"), CaseError);
}

TEST_CASE("IEEE-33 base data matches the published totals") {
  const NetworkCase net = ieee33_case(1);
  double p = 0, q = 0;
  for (const NodeData& n : net.nodes) {
    p += n.load[0] * net.s_base_kva;            // profile factor at t=0
    q += n.kappa * n.load[0] * net.s_base_kva;
  }
  // peak totals are 3715 kW / 2300 kVAr; t=0 carries profile 0.62
  CHECK(p == doctest::Approx(3715.0 * 0.62).epsilon(1e-9));
  CHECK(q == doctest::Approx(2300.0 * 0.62).epsilon(1e-9));
  CHECK(net.generator_nodes() == std::vector<int>{2, 3, 6});
}

TEST_CASE("first stage: two-node balance forces the line flow to the load") {
  const NetworkCase net = two_node_noload_gen_free();
  Model m;
  FirstStageVars fs = build_first_stage(m, net, 8);
  m.set_objective(first_stage_cost(net, fs));
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  const FirstStageSolution x = extract_first_stage(net, fs, res);
  CHECK(x.pf_da.at(0, 0) == doctest::Approx(10.0));
  CHECK(x.p0_da[0] == doctest::Approx(10.0));
  CHECK(validate_first_stage(net, x, 1e-6).ok());
}

TEST_CASE("first stage: zero loads give zero flows") {
  NetworkCase net = two_node_noload_gen_free();
  net.nodes[1].load = {0.0};
  Model m;
  FirstStageVars fs = build_first_stage(m, net, 8);
  m.set_objective(first_stage_cost(net, fs));
  const SolveResult res = m.solve();
  REQUIRE(res.status == SolveStatus::optimal);
  const FirstStageSolution x = extract_first_stage(net, fs, res);
  CHECK(x.pf_da.at(0, 0) == doctest::Approx(0.0));
  CHECK(x.qf_da.at(0, 0) == doctest::Approx(0.0));
  CHECK(x.p0_da[0] == doctest::Approx(0.0));
}

TEST_CASE("first stage: pinned voltages with resistive line and nonzero flow infeasible") {
  NetworkCase net = two_node_noload_gen_free();
  net.nodes[1].v_min = net.nodes[1].v_max = 1.0;  // both ends pinned at 1.0
  Model m;
  FirstStageVars fs = build_first_stage(m, net, 8);
  m.set_objective(first_stage_cost(net, fs));
  CHECK(m.solve().status == SolveStatus::infeasible);
}

TEST_CASE("realized demand identities") {
  CHECK(realized_demand(100, 0.0, 0.17, 0.1) == doctest::Approx(100));   // xi = 0
  CHECK(realized_demand(100, -0.7, 0.1, 0.1) == doctest::Approx(100));   // c = cref
  CHECK(realized_demand(100, -0.5, 0.12, 0.1) == doctest::Approx(90));   // arithmetic
}

TEST_CASE("second stage reduces to first-stage physics at xi=0, c=cref") {
  const Instance inst = micro1();
  const NetworkCase& net = inst.net;
  const FirstStageSolution x = first_stage_dispatch(net, net.prices.c_ref, 8, SolverOptions{});

  // the first-stage dispatch mirrored into the second stage with zero
  // adjustments satisfies Eq. (3) exactly
  SecondStageSolution y;
  const int I = net.num_nodes(), T = net.periods;
  y.demand = Mat(I, T);
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) y.demand.at(i, t) = net.nodes[i].load[t];
  y.p_rt = x.p_da;
  y.q_rt = x.q_da;
  y.pf_rt = x.pf_da;
  y.qf_rt = x.qf_da;
  y.v_rt = x.v_da;
  y.p0_rt = x.p0_da;
  y.adj_up.assign(T, 0.0);
  y.adj_dn.assign(T, 0.0);
  const Mat xi(I, T, 0.0);
  CHECK(validate_solution(net, x, y, xi, 1e-6).ok());

  // and the second-stage LP itself admits a feasible point
  Model m;
  const SecondStageStructure ss = enumerate_second_stage(net, 8);
  build_second_stage_fixed(m, net, ss, x, xi);
  m.set_objective(LinExpr(0.0));
  CHECK(m.solve().status == SolveStatus::optimal);
}

TEST_CASE("validate_solution flags a perturbed flow on the tagged row") {
  const Instance inst = micro1();
  const NetworkCase& net = inst.net;
  const FirstStageSolution x0 = first_stage_dispatch(net, net.prices.c_ref, 8, SolverOptions{});
  FirstStageSolution x = x0;
  x.pf_da.at(0, 0) += 1.0;  // 1 kW imbalance
  const ValidationReport rep = validate_first_stage(net, x, 1e-6);
  REQUIRE(!rep.ok());
  bool found = false;
  for (const ValidationIssue& v : rep.violations)
    if (v.tag.rfind("eq1a", 0) == 0 || v.tag.rfind("eq_root_da", 0) == 0) {
      found = true;
      CHECK(v.residual == doctest::Approx(1.0).epsilon(1e-6));
    }
  CHECK(found);
}

TEST_CASE("second-stage row counts split into equalities and inequalities") {
  const Instance inst = micro1();
  const SecondStageStructure ss = enumerate_second_stage(inst.net, 8);
  // per period: demand(2) + link(1) + root(1) + line balances(2) + vdrop(1) = 7 eq
  CHECK(ss.num_eq == 7);
  // adj(2) + gen bounds(4) + v bounds(4) + polygon(8) = 18 ineq
  CHECK(ss.num_ineq == 18);
  CHECK(ss.rows.size() == 25);
}
