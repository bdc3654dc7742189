#pragma once

// Improved column-and-constraint generation for the two-stage robust VPP
// pricing problem, plus the traditional C&CG baseline.
//
// Master (restricted) problem:  min C'x + eta  s.t.  Ax >= B, selector rows,
// eta >= E(x)'y_m and recourse feasibility for every stored scenario, with
// scenario demand expanded through phi coefficients so the only
// nonlinearities are c^2*z (handled by omega variables + convex square
// constraints) and c*z (exact binary envelopes w).
//
// Adversarial problems: KKT reformulation of the inner LP with Big-M
// complementarity on inequality rows (equality rows keep free duals), the
// vertex representation xi = (1-v)lo + v*hi, and |2v-1| budget rows.

#include <optional>
#include <string>
#include <vector>

#include "vppro/model.hpp"
#include "vppro/network.hpp"
#include "vppro/uncertainty.hpp"

namespace vppro {

struct CcgConfig {
  double tol = 1.0;      // $ absolute bound gap
  bool relative_gap = false;
  int max_iters = 50;
  enum class Algorithm { improved, traditional } algorithm = Algorithm::improved;
  BudgetParams budgets;
  SolverOptions solver;
  int polygon_sides = 16;
  bool v_binary = false;       // binary vertex coordinates (continuous by default)
  double eta_floor = -1e6;     // recourse lower bound for the cut-free master
  double fc_tol = 1e-6;        // s* threshold certifying second-stage feasibility (p.u.)
  double ratio_tie_tol = 1e-6; // shared-endpoint detection on c/c_ref
  std::optional<std::vector<double>> fixed_c;  // pin the TOU vector (fixed-price studies)
};

struct IterationRecord {
  int iter = 0;
  std::string phase;  // master | fc | sp
  double lb = 0, ub = 0, gap = 0, wall_s = 0;
  std::string status;
};

enum class CcgStatus { converged, iteration_limit, solver_failure };

const char* to_string(CcgStatus s);

struct CcgState {
  CcgStatus status = CcgStatus::iteration_limit;
  int iterations = 0;
  double lb = -kInf, ub = kInf;
  std::vector<double> lb_by_iter, ub_by_iter;
  std::vector<Scenario> scenarios;   // accumulated worst cases, iteration order
  Scenario last_worst;               // final iteration's worst case (not in `scenarios`
  bool has_last_worst = false;       // when the loop terminated)
  FirstStageSolution incumbent;      // x achieving the best UB
  double incumbent_ub = kInf;
  bool lb_exceeded_ub = false;       // diagnostic for the traditional baseline
  std::vector<IterationRecord> log;
  std::string failure_message;
};

// --- compact form -------------------------------------------------------------

struct CompactStructure {
  SecondStageStructure second_stage;
  int first_stage_row_count = 0;  // Eq. (1) rows (bounds kept as variable bounds)
  // E(c): second_stage_objective; Q(x) support: demand rows; R(x) support:
  // link rows (p0_da terms).
  std::vector<int> q_rows;  // indices of xi-coupled rows
  std::vector<int> r_rows;  // indices of x-coupled RHS rows
};

CompactStructure assemble_compact(const NetworkCase& net, const ElasticityTable& table,
                                  int polygon_sides);

// --- adversarial problems ------------------------------------------------------

struct FcResult {
  double s_star = 0;      // max-min total inequality violation (p.u.)
  Scenario worst;         // violating scenario when s_star > fc_tol
  double wall_s = 0;
};

struct SpResult {
  double value = 0;       // worst-case recourse cost, $
  Scenario worst;
  std::vector<double> y;  // inner recourse at the worst case
  double wall_s = 0;
};

// KKT handle bundle for one adversarial MILP (exposed for white-box tests).
struct KktSystem {
  std::vector<VarRef> y;
  std::vector<VarRef> s;        // FC mode only (per inequality row)
  std::vector<VarRef> dual;     // per second-stage row: pi (>=0) or free eq dual
  std::vector<VarRef> theta;    // FC mode: duals of s >= 0
  std::vector<VarRef> xi, v, u;
  std::vector<ConstraintRef> stationarity;
  int complementarity_binaries = 0;
};

class CcgSolver {
 public:
  CcgSolver(const NetworkCase& net, const ElasticityTable& table, CcgConfig config);

  CcgState run();

  // Algorithm building blocks (also exercised directly by tests).
  struct MasterOut {
    FirstStageSolution x;
    std::vector<int> z;
    double objective = 0;       // LB
    double eta = 0;
    std::vector<Mat> xi_m;      // stored scenarios mapped under the new z
    Mat omega, w;               // period x interval, for exactness audits
    SolveResult raw;
  };
  MasterOut solve_master(const std::vector<Scenario>& scenarios) const;

  FcResult solve_feasibility_check(const FirstStageSolution& x) const;
  SpResult solve_subproblem(const FirstStageSolution& x) const;

  // min E'y at fixed (x, xi); nullopt when infeasible.
  std::optional<double> inner_recourse_value(const FirstStageSolution& x, const Mat& xi) const;
  // min 1's over inequality-row slacks at fixed (x, xi); always finite.
  double inner_phase1_value(const FirstStageSolution& x, const Mat& xi) const;

  const CompactStructure& compact() const { return compact_; }
  const CcgConfig& config() const { return config_; }
  const NetworkCase& net() const { return net_; }
  const ElasticityTable& table() const { return table_; }

 private:
  struct AdversaryOut {
    double objective = -kInf;
    Mat xi, v;
    std::vector<int> z;
    std::vector<double> y;
    bool feasible = false;
  };
  AdversaryOut solve_adversary(const FirstStageSolution& x, bool fc_mode) const;
  AdversaryOut solve_adversary_combo(const FirstStageSolution& x, const std::vector<int>& z,
                                     bool fc_mode) const;
  Scenario canonicalize_scenario(const FirstStageSolution& x, const AdversaryOut& adv,
                                 bool fc_mode) const;
  // phi[i][k] = L_it * ((1-v)lo + v*hi) per scenario; traditional mode uses
  // k-independent phi built from the stored xi.
  std::vector<double> scenario_psi(const Scenario& s) const;  // (i*T+t)*K+k

  const NetworkCase& net_;
  const ElasticityTable& table_;
  CcgConfig config_;
  CompactStructure compact_;
};

// Per-iteration CSV: iter,phase,LB,UB,gap,wall_s,status
void write_iterations_csv(const std::string& path, const CcgState& state);

// --- Appendix-A claims ----------------------------------------------------------

struct ClaimsReport {
  bool sandwich = true;       // LB_N <= O* <= UB_N whenever O* supplied
  bool vertices_distinct = true;
  bool iteration_bound = true;
  std::string detail;
  bool all() const { return sandwich && vertices_distinct && iteration_bound; }
};

ClaimsReport audit_claims(const CcgState& state, std::optional<double> oracle_value,
                          int vertex_components, double tol);

}  // namespace vppro
