#pragma once

// VPP physical model: radial LinDistFlow network, day-ahead (first-stage) and
// real-time (second-stage) constraint builders, the realized-demand map, and
// the inscribed-polygon inner approximation of apparent-power limits.
//
// Unit conventions: case files carry kW / kVAr / kVA and voltage magnitudes in
// p.u.; on load all powers are divided by base.s_base_kva so that internal
// model quantities are per-unit (voltage variables are p.u. squared).  Prices
// stay in $/kWh; objective coefficients multiply by s_base_kva so objective
// values are $ for hourly periods.

#include <optional>
#include <string>
#include <vector>

#include "vppro/mat.hpp"
#include "vppro/model.hpp"

namespace vppro {

struct CaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NodeData {
  int id = 0;
  double kappa = 0.0;             // reactive-to-active demand ratio
  std::vector<double> load;       // per-period active load (p.u. internally)
  double p_min = 0, p_max = 0;    // generation bounds (p.u.)
  double q_min = 0, q_max = 0;
  double v_min = 0.9, v_max = 1.1;  // voltage magnitude bounds (p.u.)
  double gen_cost = 0.0;          // $/kWh
  bool has_generator() const {
    return p_min != 0 || p_max != 0 || q_min != 0 || q_max != 0;
  }
};

struct LineData {
  int from = 0, to = 0;
  double r = 0, x = 0;   // p.u.
  double s_max = 0;      // p.u. internally
};

struct PriceParams {
  std::vector<double> rho_da, rho_up, rho_dn;  // $/kWh per period
  std::vector<double> c_ref;                   // reference price per period
  double tou_min = 0, tou_max = 0;             // TOU price bounds
};

struct NetworkCase {
  std::vector<NodeData> nodes;
  std::vector<LineData> lines;
  PriceParams prices;
  int periods = 0;
  double s_base_kva = 1000.0;
  bool root_bounded = false;  // apply generator bounds to the root injection

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
  std::vector<int> generator_nodes() const;  // excludes the root
  // children[j] = indices into `lines` of lines leaving node j
  std::vector<std::vector<int>> children_lines() const;
  // parent_line[j] = index of the line into node j; -1 for the root
  std::vector<int> parent_lines() const;

  // Throws CaseError on structural problems; returns soft warnings
  // (e.g. price-ordering violations).
  std::vector<std::string> validate() const;

  static NetworkCase from_json_file(const std::string& path);
  static NetworkCase from_json_text(const std::string& text, const std::string& origin = "<text>");
  void to_json_file(const std::string& path) const;
  std::string to_json_text() const;
};

// --- polygon inner approximation ---------------------------------------------

struct Halfplane {
  double cos_coef, sin_coef, rhs;
};

// Half-planes of the regular S-gon inscribed in the disk of radius s_max:
//   p*cos((2s-1)pi/S) + q*sin((2s-1)pi/S) <= cos(pi/S)*s_max,  s = 1..S
std::vector<Halfplane> polygon_halfplanes(int sides, double s_max);

// --- realized demand ----------------------------------------------------------

inline double realized_demand(double load, double xi, double c_tou, double c_ref) {
  return load * (1.0 + xi * (c_tou / c_ref - 1.0));
}

// --- solutions ----------------------------------------------------------------

struct FirstStageSolution {
  std::vector<double> c_tou;  // $/kWh
  std::vector<double> p0_da;  // p.u.
  Mat p_da, q_da;             // node x period (zero rows for non-generators)
  Mat pf_da, qf_da;           // line x period
  Mat v_da;                   // node x period, p.u. squared
};

struct SecondStageSolution {
  Mat demand;                 // realized l, node x period
  Mat p_rt, q_rt;             // node x period
  Mat pf_rt, qf_rt;           // line x period
  Mat v_rt;                   // node x period
  std::vector<double> p0_rt, adj_up, adj_dn;  // per period
};

// --- first stage ----------------------------------------------------------------

struct FirstStageVars {
  std::vector<VarRef> c, p0;                 // per period
  std::vector<std::vector<VarRef>> pg, qg;   // per generator node (order of generator_nodes())
  std::vector<std::vector<VarRef>> pf, qf;   // per line
  std::vector<std::vector<VarRef>> v;        // per node
  std::vector<ConstraintRef> rows;
};

// Registers Eq. (1): balances, voltage drop, polygonized flow limits, voltage
// and generation bounds (as variable bounds), TOU bounds, and the root
// injection definition.  Returns every created handle.
FirstStageVars build_first_stage(Model& model, const NetworkCase& net, int polygon_sides);

// First-stage ($) objective: sum_t rho_t * p0_t * s_base.
LinExpr first_stage_cost(const NetworkCase& net, const FirstStageVars& x);

FirstStageSolution extract_first_stage(const NetworkCase& net, const FirstStageVars& vars,
                                       const SolveResult& res);

// --- second stage ---------------------------------------------------------------

// Index layout of the second-stage variable vector y.
struct SecondStageLayout {
  int I = 0, T = 0, L = 0, G = 0;
  std::vector<int> gen_nodes;
  std::vector<int> gen_slot;  // node id -> generator slot or -1

  int l(int i, int t) const { return i * T + t; }
  int pg(int g, int t) const { return I * T + g * T + t; }
  int qg(int g, int t) const { return I * T + (G + g) * T + t; }
  int pf(int line, int t) const { return (I + 2 * G) * T + line * T + t; }
  int qf(int line, int t) const { return (I + 2 * G) * T + (L + line) * T + t; }
  int v(int i, int t) const { return (I + 2 * G + 2 * L) * T + i * T + t; }
  int dup(int t) const { return (2 * I + 2 * G + 2 * L) * T + t; }
  int ddn(int t) const { return (2 * I + 2 * G + 2 * L + 1) * T + t; }
  int p0rt(int t) const { return (2 * I + 2 * G + 2 * L + 2) * T + t; }
  int n_y() const { return (2 * I + 2 * G + 2 * L + 3) * T; }
};

enum class SsRowKind {
  demand, link_p0, root_balance, balance_p, balance_q, vdrop,
  adj_up, adj_dn, gen_p_lo, gen_p_hi, gen_q_lo, gen_q_hi,
  v_lo, v_hi, polygon, root_p_lo, root_p_hi,
};

// One row of the compact second stage  P y >= Q(x) xi + R(x)  (equalities kept
// as equalities).  The RHS splits into: rhs (constant) + load*(c_t/cref_t - 1)
// * xi_{i,t} on demand rows + p0_da[t] on the link rows.
struct SsRow {
  Sense sense = Sense::ge;  // ge or eq
  std::vector<std::pair<int, double>> y;
  double rhs = 0.0;
  int xi_i = -1, xi_t = -1;
  double load = 0.0;
  int p0da_t = -1;
  SsRowKind kind{};
  std::string tag;
};

struct SecondStageStructure {
  SecondStageLayout layout;
  std::vector<SsRow> rows;
  int num_eq = 0, num_ineq = 0;
};

SecondStageStructure enumerate_second_stage(const NetworkCase& net, int polygon_sides);

// Minimization objective E(c) over y, in $.
std::vector<double> second_stage_objective(const NetworkCase& net,
                                           const SecondStageLayout& layout,
                                           const std::vector<double>& c_tou);

// Numeric RHS of a row for fixed first stage and scenario.
double ss_row_rhs(const SsRow& row, const NetworkCase& net, const std::vector<double>& c_tou,
                  const std::vector<double>& p0_da, const Mat& xi);

// Builds the second stage as a plain LP block with x and xi fixed (subproblem
// mode): fresh free variables y plus one model row per SsRow.
struct SecondStageBuild {
  std::vector<VarRef> y;
  std::vector<ConstraintRef> rows;
};
SecondStageBuild build_second_stage_fixed(Model& model, const NetworkCase& net,
                                          const SecondStageStructure& ss,
                                          const FirstStageSolution& x, const Mat& xi);

SecondStageSolution extract_second_stage(const NetworkCase& net, const SecondStageLayout& layout,
                                         const std::vector<double>& y);

// --- validation ------------------------------------------------------------------

struct ValidationIssue {
  std::string tag;
  double residual;
};

struct ValidationReport {
  std::vector<ValidationIssue> violations;
  double max_residual = 0.0;
  bool ok() const { return violations.empty(); }
};

// Re-evaluates Eq. (1) and Eq. (3) residuals at a full solution tuple,
// including the exact quadratic flow limits (not their polygons).
ValidationReport validate_solution(const NetworkCase& net, const FirstStageSolution& x,
                                   const SecondStageSolution& y, const Mat& xi, double tol);

// First-stage-only variant (Eq. (1) residuals).
ValidationReport validate_first_stage(const NetworkCase& net, const FirstStageSolution& x,
                                      double tol);

}  // namespace vppro
