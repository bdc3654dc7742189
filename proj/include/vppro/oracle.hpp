#pragma once

// Brute-force reference solvers for small instances.  The worst-case oracle
// enumerates the vertices of the budget polytope (components in {0, 1/2, 1})
// and solves one direct LP per vertex; the full oracle adds a grid search
// over the TOU price vector with an exact deterministic-equivalent LP per
// grid point.  Everything here avoids the KKT/Big-M/C&CG machinery on
// purpose: it is the independent route the solver is validated against.

#include <optional>
#include <vector>

#include "vppro/ccg.hpp"
#include "vppro/network.hpp"
#include "vppro/uncertainty.hpp"

namespace vppro {

struct OracleOptions {
  int polygon_sides = 16;
  SolverOptions solver;
  double ratio_tie_tol = 1e-6;
  int max_components = 16;   // enumeration guard on free (load,span)>0 components
  long max_vertices = 300000;
};

struct OracleResult {
  double value = -kInf;               // max over vertices of the inner LP optimum
  Mat v_arg;                          // argmax vertex (lex-lowest on ties)
  std::vector<int> z_arg;
  std::vector<double> vertex_values;  // per enumerated vertex (+inf = infeasible inner LP)
  long enumeration_count = 0;
  bool any_infeasible = false;
  Mat infeasible_v;
  std::vector<int> infeasible_z;
  // oracle_full extras
  double grid_value = kInf;           // min over the c grid of the exact O(c)
  std::vector<double> c_arg;
  double grid_error = 0.0;            // half of the largest adjacent jump, summed per period
  std::vector<double> grid_values;    // O(c) per grid point, scan order
};

// Exact worst case of the second stage for a fixed first-stage solution:
// enumerates budget-polytope vertices (integer budgets required) across the
// tie-conservative interval combinations.
OracleResult oracle_worst_case(const NetworkCase& net, const ElasticityTable& table,
                               const FirstStageSolution& x, const BudgetParams& budgets,
                               const OracleOptions& opts);

// Same enumeration with the phase-1 objective (min total inequality slack per
// vertex, maximized over vertices): the reference value for the feasibility
// check.  value == 0 within tolerance iff recourse exists everywhere.
OracleResult oracle_feasibility(const NetworkCase& net, const ElasticityTable& table,
                                const FirstStageSolution& x, const BudgetParams& budgets,
                                const OracleOptions& opts);

// Grid search over c in [tou_min, tou_max]^T; for each grid point solves the
// deterministic-equivalent LP (first stage + one recourse copy per vertex)
// exactly, then minimizes over the grid.
OracleResult oracle_full(const NetworkCase& net, const ElasticityTable& table,
                         int grid_points_per_period, const BudgetParams& budgets,
                         const OracleOptions& opts);

// Budget-polytope vertex candidates over the free components of the selected
// boxes (exposed for tests): rows.size() vertices, each a full I x T matrix
// with non-free components at their canonical values.
std::vector<Mat> enumerate_budget_vertices(const NetworkCase& net, const ElasticityTable& table,
                                           const std::vector<int>& z, const BudgetParams& budgets,
                                           const OracleOptions& opts);

}  // namespace vppro
