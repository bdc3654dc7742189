#pragma once

// Decision-dependent uncertainty set of the demand price elasticity: ratio
// intervals with per-node elasticity bounds, the binary-selector
// reformulation, the vertex representation of scenarios, and uncertainty
// budgets.

#include <optional>
#include <string>
#include <vector>

#include "vppro/mat.hpp"
#include "vppro/model.hpp"

namespace vppro {

struct TableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfCoverageError : TableError {
  using TableError::TableError;
};

struct RatioInterval {
  double r_lo = 0, r_hi = 0;
};

struct XiBounds {
  double lo = 0, hi = 0;
};

class ElasticityTable {
 public:
  ElasticityTable() = default;
  ElasticityTable(int nodes, int periods, int intervals);

  int nodes() const { return I_; }
  int periods() const { return T_; }
  int num_intervals() const { return K_; }

  RatioInterval& interval(int t, int k) { return intervals_[t * K_ + k]; }
  const RatioInterval& interval(int t, int k) const { return intervals_[t * K_ + k]; }
  XiBounds& xi(int i, int t, int k) { return xi_[(i * T_ + t) * K_ + k]; }
  const XiBounds& xi(int i, int t, int k) const { return xi_[(i * T_ + t) * K_ + k]; }

  // Contiguity/ordering checks per the set definition; throws TableError.
  void validate() const;

  // CSV with header node,t,k,r_lo,r_hi,xi_lo,xi_hi.  A class-based shorthand
  // (header class,t,k,...) is accepted when `class_map_path` points to a CSV
  // with header node,class.  Nodes absent from the file get [0,0] bounds.
  static ElasticityTable from_csv(const std::string& path, int nodes, int periods,
                                  const std::optional<std::string>& class_map_path = {});
  void to_csv(const std::string& path) const;

 private:
  int I_ = 0, T_ = 0, K_ = 0;
  std::vector<RatioInterval> intervals_;
  std::vector<XiBounds> xi_;
};

// Interval containing `ratio` for period t; shared endpoints resolve to the
// lower k.  Throws OutOfCoverageError outside the covered range.
int interval_lookup(const ElasticityTable& table, int t, double ratio);

// Adjacent interval candidates when `ratio` sits within `tie_tol` of a shared
// endpoint; a single element otherwise.
std::vector<int> interval_candidates(const ElasticityTable& table, int t, double ratio,
                                     double tie_tol);

struct BudgetParams {
  double gamma_t = 0;  // per-node budget across periods
  double gamma_s = 0;  // per-period budget across nodes
};

struct Scenario {
  Mat xi;              // node x period elasticity
  Mat v;               // node x period vertex coordinates in [0,1]
  std::vector<int> z;  // selected interval per period
};

// xi_it = (1 - v_it) * xi_lo + v_it * xi_hi under the z-selected interval.
Mat vertex_to_scenario(const ElasticityTable& table, const std::vector<int>& z, const Mat& v);

// Inverse map; v = (xi - lo)/(hi - lo), v := 0 on degenerate intervals.
// Throws TableError if xi falls outside the selected bounds beyond `tol`.
Mat scenario_to_vertex(const ElasticityTable& table, const std::vector<int>& z, const Mat& xi,
                       double tol = 1e-6);

// Empty string when the scenario satisfies its invariants (one-hot selector
// within table range, xi inside the selected bounds, xi consistent with v).
std::string check_scenario(const ElasticityTable& table, const Scenario& s, double tol = 1e-6);

// --- model fragments ---------------------------------------------------------

enum class ReformMode { master, adversary };

struct ZEntry {
  VarRef var;        // valid when the selector stays a decision
  double fixed = 0;  // otherwise the resolved 0/1 value
  bool is_var = false;
};

struct SetReformulation {
  std::vector<std::vector<ZEntry>> z;  // [t][k]
  std::vector<VarRef> xi;              // i*T + t
  std::vector<ConstraintRef> rows;
};

// Registers the selector reformulation of the uncertainty set.  In master
// mode c is a vector of model variables and every z_tk is binary.  In
// adversary mode c is fixed: z is pre-resolved by interval_lookup where the
// ratio is strictly interior, and kept binary over the adjacent candidates on
// shared endpoints (the adversary picks the worse).
SetReformulation add_set_reformulation(Model& model, const ElasticityTable& table,
                                       const std::vector<VarRef>& c_vars,
                                       const std::vector<double>& c_fixed,
                                       const std::vector<double>& c_ref, ReformMode mode,
                                       double tie_tol = 1e-6);

struct BudgetHandles {
  std::vector<VarRef> u;  // i*T + t auxiliaries, u >= |2v - 1|, u <= 1
  std::vector<ConstraintRef> rows;
};

// sum_i u_it <= gamma_s per t and sum_t u_it <= gamma_t per i.
BudgetHandles add_budget_constraints(Model& model, const std::vector<VarRef>& v, int nodes,
                                     int periods, const BudgetParams& budgets);

}  // namespace vppro
