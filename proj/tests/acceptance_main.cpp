// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.  Exit code = number of failed
// criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "vppro/ccg.hpp"
#include "vppro/instances.hpp"
#include "vppro/network.hpp"
#include "vppro/oracle.hpp"

using namespace vppro;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %s%s%s\n", pass ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " - ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

CcgConfig base_config(const Instance& inst, int polygon_sides) {
  CcgConfig cfg;
  cfg.tol = 1e-4;
  cfg.max_iters = 25;
  cfg.polygon_sides = polygon_sides;
  cfg.budgets = inst.budgets;
  cfg.solver.want_duals = false;
  return cfg;
}

OracleOptions oracle_opts(const CcgConfig& cfg) {
  OracleOptions o;
  o.polygon_sides = cfg.polygon_sides;
  o.solver = cfg.solver;
  return o;
}

// --- criterion 1: oracle equivalence of the subproblem --------------------------

void criterion_subproblem_equivalence() {
  const double t0 = now_s();
  int compared = 0, fc_cases = 0;
  double worst_rel = 0;
  std::string detail;
  bool ok = true;
  RandomMicroParams params;
  params.allow_tight_lines = false;
  for (std::uint64_t seed = 1; compared < 20 && seed < 200; ++seed) {
    const Instance inst = random_micro(seed, params);
    CcgConfig cfg = base_config(inst, 8);
    CcgSolver solver(inst.net, inst.table, cfg);
    const double mult = 0.75 + 0.25 * static_cast<double>(seed % 3);
    std::vector<double> c;
    for (double cr : inst.net.prices.c_ref) c.push_back(mult * cr);
    FirstStageSolution x;
    try {
      x = first_stage_dispatch(inst.net, c, cfg.polygon_sides, cfg.solver);
    } catch (const ModelError&) {
      continue;  // first stage infeasible under this draw
    }
    const FcResult fc = solver.solve_feasibility_check(x);
    if (fc.s_star > cfg.fc_tol) {
      ++fc_cases;
      continue;
    }
    const SpResult sp = solver.solve_subproblem(x);
    const OracleResult oc =
        oracle_worst_case(inst.net, inst.table, x, cfg.budgets, oracle_opts(cfg));
    if (oc.any_infeasible) {
      ok = false;
      detail = "oracle found an infeasible vertex after FC passed (seed " +
               std::to_string(seed) + ")";
      break;
    }
    const double err = std::abs(sp.value - oc.value) / (1.0 + std::abs(oc.value));
    worst_rel = std::max(worst_rel, err);
    if (err > 1e-5) {
      ok = false;
      detail = "seed " + std::to_string(seed) + ": |SP-oracle| rel err " + std::to_string(err);
      break;
    }
    ++compared;
  }
  const double elapsed = now_s() - t0;
  if (ok && compared < 20) {
    ok = false;
    detail = "only " + std::to_string(compared) + " comparable instances";
  }
  if (ok && elapsed > 300.0) {
    ok = false;
    detail = "runtime " + std::to_string(elapsed) + "s exceeds 5 min";
  }
  if (ok)
    detail = std::to_string(compared) + " instances (+" + std::to_string(fc_cases) +
             " FC-failing draws skipped), worst rel err " + std::to_string(worst_rel) + ", " +
             std::to_string(elapsed) + "s";
  report("oracle equivalence (subproblem)", ok, detail);
}

// --- criterion 2: end-to-end oracle equivalence ----------------------------------

void criterion_end_to_end() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"micro1", "tiny_t2", "tiny_i2"}) {
    const Instance inst = instance_by_name(name);
    CcgConfig cfg = base_config(inst, 8);
    CcgSolver solver(inst.net, inst.table, cfg);
    const CcgState state = solver.run();
    if (state.status != CcgStatus::converged) {
      ok = false;
      detail += std::string(name) + ": did not converge; ";
      continue;
    }
    const OracleResult full =
        oracle_full(inst.net, inst.table, 21, cfg.budgets, oracle_opts(cfg));
    if (state.incumbent_ub > full.grid_value + cfg.tol + 1e-6 ||
        state.incumbent_ub < full.grid_value - full.grid_error - cfg.tol - 1e-6) {
      ok = false;
      detail += std::string(name) + ": value " + std::to_string(state.incumbent_ub) +
                " vs oracle " + std::to_string(full.grid_value) + " (err bound " +
                std::to_string(full.grid_error) + "); ";
    }
    int effective = 0;
    for (int i = 0; i < inst.net.num_nodes(); ++i)
      for (int t = 0; t < inst.net.periods; ++t)
        if (inst.net.nodes[i].load[t] > 0) ++effective;
    const ClaimsReport claims = audit_claims(state, full.grid_value, effective,
                                             cfg.tol + full.grid_error + 1e-6);
    if (!claims.all()) {
      ok = false;
      detail += std::string(name) + ": claims audit: " + claims.detail + "; ";
    }
  }
  report("oracle equivalence (end-to-end) + Appendix-A claims", ok, detail);
}

// --- criterion 3: FC soundness -----------------------------------------------------

void criterion_fc_soundness() {
  bool ok = true;
  std::string detail;
  {
    const Instance inst = micro1();
    CcgConfig cfg = base_config(inst, 8);
    CcgSolver solver(inst.net, inst.table, cfg);
    const FirstStageSolution x =
        first_stage_dispatch(inst.net, {0.09}, cfg.polygon_sides, cfg.solver);
    const FcResult fc = solver.solve_feasibility_check(x);
    if (fc.s_star > cfg.fc_tol) {
      ok = false;
      detail += "generous instance failed FC; ";
    } else {
      std::mt19937_64 rng(17);
      const std::vector<int> z = {interval_lookup(inst.table, 0, 0.9)};
      for (int trial = 0; trial < 100; ++trial) {
        Mat v(2, 1, 0.5);
        v.at(1, 0) = std::generate_canonical<double, 53>(rng);
        const Mat xi = vertex_to_scenario(inst.table, z, v);
        if (solver.inner_phase1_value(x, xi) > 1e-7) {
          ok = false;
          detail += "sampled scenario infeasible after s*=0; ";
          break;
        }
      }
    }
  }
  {
    const Instance inst = micro1_tight();
    CcgConfig cfg = base_config(inst, 8);
    CcgSolver solver(inst.net, inst.table, cfg);
    const FirstStageSolution x =
        first_stage_dispatch(inst.net, {0.07}, cfg.polygon_sides, cfg.solver);
    const FcResult fc = solver.solve_feasibility_check(x);
    if (fc.s_star <= cfg.fc_tol) {
      ok = false;
      detail += "tight instance passed FC; ";
    } else if (solver.inner_recourse_value(x, fc.worst.xi).has_value()) {
      ok = false;
      detail += "returned xi* unexpectedly admits recourse; ";
    }
  }
  report("FC soundness", ok, detail);
}

// --- criterion 4: polygon bounds ---------------------------------------------------

void criterion_polygon_bounds() {
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(23);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  for (int S : {3, 4, 16, 64}) {
    const double s_max = 3.2;
    const auto hp = polygon_halfplanes(S, s_max);
    auto inside = [&](double p, double q) {
      for (const Halfplane& h : hp)
        if (h.cos_coef * p + h.sin_coef * q > h.rhs + 1e-12) return false;
      return true;
    };
    int kept = 0;
    while (kept < 500) {
      const double p = uniform(-s_max, s_max), q = uniform(-s_max, s_max);
      if (!inside(p, q)) continue;
      ++kept;
      if (p * p + q * q > s_max * s_max + 1e-9) {
        ok = false;
        detail += "S=" + std::to_string(S) + ": polygon point outside the disk; ";
        break;
      }
    }
    const double inner = std::cos(3.14159265358979323846 / S) * s_max;
    for (int trial = 0; trial < 500; ++trial) {
      const double ang = uniform(0, 2 * 3.14159265358979323846);
      const double r = inner * std::sqrt(uniform(0, 1));
      if (!inside(r * std::cos(ang), r * std::sin(ang))) {
        ok = false;
        detail += "S=" + std::to_string(S) + ": apothem-disk point cut off; ";
        break;
      }
    }
  }
  report("polygon bounds (S in {3,4,16,64})", ok, detail);
}

// --- criterion 5: linearization exactness -----------------------------------------

void criterion_linearization_exactness() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"micro1", "tiny_t2"}) {
    const Instance inst = instance_by_name(name);
    CcgConfig cfg = base_config(inst, 8);  // native QC mode is the default
    CcgSolver solver(inst.net, inst.table, cfg);
    const CcgState state = solver.run();
    std::vector<Scenario> scns = state.scenarios;
    if (state.has_last_worst) scns.push_back(state.last_worst);
    if (scns.empty()) {
      Scenario s;
      s.z.assign(inst.net.periods, 0);
      s.v = Mat(inst.net.num_nodes(), inst.net.periods, 0.0);
      s.xi = vertex_to_scenario(inst.table, s.z, s.v);
      scns.push_back(s);
    }
    const auto master = solver.solve_master(scns);
    const int K = inst.table.num_intervals();
    for (int t = 0; t < inst.net.periods; ++t) {
      const double c = master.x.c_tou[t];
      for (int k = 0; k < K; ++k) {
        const double zk = k == master.z[t] ? 1.0 : 0.0;
        if (!std::isnan(master.w.at(t, k)) &&
            std::abs(master.w.at(t, k) - zk * c) > 1e-6) {
          ok = false;
          detail += std::string(name) + ": w mismatch at t=" + std::to_string(t) + "; ";
        }
        if (!std::isnan(master.omega.at(t, k)) &&
            std::abs(master.omega.at(t, k) - zk * c * c) > 1e-6) {
          ok = false;
          detail += std::string(name) + ": omega mismatch at t=" + std::to_string(t) + "; ";
        }
      }
    }
  }
  report("linearization exactness (omega = z c^2, w = z c)", ok, detail);
}

// --- criterion 6: comparative findings ---------------------------------------------

void criterion_comparative() {
  bool ok = true;
  std::string detail;
  // (a) optimized TOU never loses to fixed TOU
  for (const char* name : {"micro1", "tiny_t2"}) {
    const Instance inst = instance_by_name(name);
    CcgConfig cfg = base_config(inst, 8);
    CcgSolver solver(inst.net, inst.table, cfg);
    const CcgState opt = solver.run();
    if (opt.status != CcgStatus::converged) {
      ok = false;
      detail += std::string(name) + ": optimized run failed; ";
      continue;
    }
    for (double mult : {0.8, 1.0, 1.5, 2.0}) {
      bool covered = true;
      std::vector<double> c;
      for (int t = 0; t < inst.net.periods; ++t) {
        c.push_back(mult * inst.net.prices.c_ref[t]);
        try {
          interval_lookup(inst.table, t, mult);
        } catch (const OutOfCoverageError&) {
          covered = false;
        }
      }
      if (!covered) continue;
      if (c.back() > inst.net.prices.tou_max || c.front() < inst.net.prices.tou_min) continue;
      CcgConfig fixed_cfg = cfg;
      fixed_cfg.fixed_c = c;
      CcgSolver fixed_solver(inst.net, inst.table, fixed_cfg);
      const CcgState fixed = fixed_solver.run();
      if (fixed.status == CcgStatus::converged &&
          opt.incumbent_ub > fixed.incumbent_ub + cfg.tol + 1e-6) {
        ok = false;
        detail += std::string(name) + ": optimized " + std::to_string(opt.incumbent_ub) +
                  " worse than fixed x" + std::to_string(mult) + " = " +
                  std::to_string(fixed.incumbent_ub) + "; ";
      }
    }
  }
  // (b) objective non-increasing as budgets shrink
  {
    const Instance inst = tiny_i2();
    const std::vector<BudgetParams> chain = {{1, 2}, {1, 1}, {0, 1}, {0, 0}};
    double prev = kInf;
    for (const BudgetParams& b : chain) {
      CcgConfig cfg = base_config(inst, 8);
      cfg.budgets = b;
      CcgSolver solver(inst.net, inst.table, cfg);
      const CcgState state = solver.run();
      if (state.status != CcgStatus::converged) {
        ok = false;
        detail += "budget run did not converge; ";
        break;
      }
      if (state.incumbent_ub > prev + cfg.tol + 1e-6) {
        ok = false;
        detail += "objective increased when budgets shrank; ";
      }
      prev = state.incumbent_ub;
    }
  }
  // (c) crafted DDU instance: traditional stalls or crosses bounds
  {
    const Instance inst = ddu_trap();
    CcgConfig cfg = base_config(inst, 8);
    cfg.max_iters = 10;
    CcgSolver improved(inst.net, inst.table, cfg);
    const CcgState si = improved.run();
    cfg.algorithm = CcgConfig::Algorithm::traditional;
    CcgSolver traditional(inst.net, inst.table, cfg);
    const CcgState st = traditional.run();
    if (si.status != CcgStatus::converged) {
      ok = false;
      detail += "improved mode failed on the crafted instance; ";
    }
    if (st.status == CcgStatus::converged && !st.lb_exceeded_ub) {
      ok = false;
      detail += "traditional mode neither stalled nor crossed LB>UB; ";
    }
  }
  report("comparative findings (fixed-TOU, budget trend, traditional divergence)", ok, detail);
}

// --- criterion 7: scale check -------------------------------------------------------

void criterion_scale() {
  const double t0 = now_s();
  const Instance inst = instance_by_name("ieee33");
  CcgConfig cfg;
  cfg.tol = 1.0;  // |UB-LB| <= $1
  cfg.max_iters = 10;
  cfg.polygon_sides = 16;
  cfg.budgets = inst.budgets;  // (24, 33)
  cfg.solver.want_duals = false;
  CcgSolver solver(inst.net, inst.table, cfg);
  const CcgState state = solver.run();
  const double elapsed = now_s() - t0;
  bool ok = state.status == CcgStatus::converged && state.iterations <= 10 && elapsed <= 1800.0;
  std::ostringstream detail;
  detail << "status=" << to_string(state.status) << " iters=" << state.iterations
         << " obj=" << state.incumbent_ub << " gap=" << state.ub - state.lb
         << " wall=" << elapsed << "s S=" << cfg.polygon_sides;
  if (!state.failure_message.empty()) detail << " msg=" << state.failure_message;
  report("scale check (IEEE-33 x T=24 x K=5, tol $1, <=10 iters, <=30 min)", ok, detail.str());
}

// --- criterion 8: determinism -------------------------------------------------------

void criterion_determinism() {
  const std::string data = VPPRO_DATA_DIR;
  const fs::path tmp = fs::temp_directory_path() / "vppro_accept_det";
  fs::remove_all(tmp);
  auto run = [&](const std::string& out) {
    const std::string cmd = std::string(VPPRO_CLI_BIN) + " solve --case " + data +
                            "/micro1.case.json --elasticity " + data +
                            "/micro1.elasticity.csv --budgets 1,2 --polygon-sides 8 --tol 0.001 "
                            "--seed 5 --out " + out + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  bool ok = run((tmp / "a").string()) == 0 && run((tmp / "b").string()) == 0;
  std::string detail;
  if (ok) {
    auto canon = [](const fs::path& p) {
      std::ifstream in(p / "solution.json");
      json j = json::parse(in);
      j.erase("wall_time_s");
      return j.dump();
    };
    const std::string a = canon(tmp / "a"), b = canon(tmp / "b");
    ok = a == b;
    if (!ok) detail = "solution.json differs between identical runs";
  } else {
    detail = "CLI runs failed";
  }
  report("determinism (fixed seed => identical solution.json)", ok, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion_subproblem_equivalence();
  criterion_end_to_end();
  criterion_fc_soundness();
  criterion_polygon_bounds();
  criterion_linearization_exactness();
  criterion_comparative();
  criterion_scale();
  criterion_determinism();
  std::printf("================\n%d criterion(s) failed\n", g_failures);
  return g_failures;
}
