#pragma once

// Linear / mixed-integer model builder with pluggable solver backends.
//
// A Model owns variables, linear constraints and optional convex quadratic
// constraints of the form c^2 <= omega + M*(1-z).  Solving compiles the model
// to a sparse form and hands it to a backend adapter (see backend.hpp).  The
// quadratic constraints are enforced through tangent cuts: adaptively refined
// to feas-tolerance in native_convex_qc mode, or on a fixed grid of
// `breakpoints` tangent points in piecewise_linear mode (under-approximating
// c^2 by at most (segment width / 2)^2).

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vppro {

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- errors ----------------------------------------------------------------

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidBoundsError : ModelError {
  using ModelError::ModelError;
};
struct ForeignVariableError : ModelError {
  using ModelError::ModelError;
};
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- handles and expressions -------------------------------------------------

enum class VarKind { continuous, binary };
enum class Sense { le, ge, eq };

struct VarRef {
  std::int32_t model = -1;
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(const VarRef& a, const VarRef& b) {
    return a.model == b.model && a.index == b.index;
  }
};

struct ConstraintRef {
  std::int32_t model = -1;
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double constant) : constant_(constant) {}  // NOLINT(implicit)
  LinExpr(VarRef v) { add(v, 1.0); }                 // NOLINT(implicit)

  void add(VarRef v, double coef);
  void add_constant(double c) { constant_ += c; }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }

  // Sums duplicate terms and drops coefficients below 1e-12 in magnitude.
  void canonicalize();

  const std::vector<std::pair<VarRef, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }
  bool finite() const;

 private:
  std::vector<std::pair<VarRef, double>> terms_;
  double constant_ = 0.0;
};

inline LinExpr operator*(VarRef v, double s) { return LinExpr(v) * s; }
inline LinExpr operator*(double s, VarRef v) { return LinExpr(v) * s; }

// --- solve configuration and results ----------------------------------------

enum class QuadraticMode { native_convex_qc, piecewise_linear };

struct SolverOptions {
  double mip_gap = 1e-6;       // relative MIP gap
  double time_limit = 0.0;     // seconds; 0 = no limit
  double big_M = 1e4;
  double feas_tol = 1e-7;
  QuadraticMode quadratic_mode = QuadraticMode::native_convex_qc;
  int breakpoints = 9;         // piecewise mode only; >= 2
  bool want_duals = true;      // duals are only available for pure LP solves
};

enum class SolveStatus { optimal, infeasible, unbounded, limit };

const char* to_string(SolveStatus s);

enum class DiagnosticKind {
  big_m_violation,          // |dual| or |slack| at >= 0.99 * big_M
  complementarity_residual, // dual*slack > feas_tol * big_M
  feasibility_recheck,      // independent re-evaluation found a violated row
};

struct Diagnostic {
  DiagnosticKind kind;
  std::string tag;
  double value = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::limit;
  double objective = 0.0;
  std::vector<double> primal;  // indexed by VarRef.index; empty unless optimal/limit
  std::vector<double> dual;    // indexed by ConstraintRef.index; pure-LP solves only
  double gap = 0.0;
  double wall_time = 0.0;
  std::vector<Diagnostic> diagnostics;

  double value(VarRef v) const { return primal.at(static_cast<size_t>(v.index)); }
  bool has_duals() const { return !dual.empty(); }
  double dual_of(ConstraintRef c) const { return dual.at(static_cast<size_t>(c.index)); }
  bool clean() const { return diagnostics.empty(); }
};

// --- compiled form shared with backends --------------------------------------

struct CompiledModel {
  int nv = 0;
  std::vector<double> lb, ub, obj;
  double obj_constant = 0.0;
  bool maximize = false;
  std::vector<std::int32_t> integer_vars;
  // CSR constraint matrix with two-sided row bounds
  std::vector<double> row_lo, row_hi;
  std::vector<std::int64_t> a_start;
  std::vector<std::int32_t> a_col;
  std::vector<double> a_val;
  std::vector<std::string> row_name;  // provenance tags (also used by MPS writer)
  int n_model_rows = 0;               // rows belonging to Model constraints (prefix)
};

// --- model -------------------------------------------------------------------

class Model {
 public:
  explicit Model(SolverOptions options = {});

  VarRef add_variable(VarKind kind, double lo = 0.0, double hi = kInf);
  VarRef add_continuous(double lo, double hi) { return add_variable(VarKind::continuous, lo, hi); }
  VarRef add_binary() { return add_variable(VarKind::binary, 0.0, 1.0); }

  ConstraintRef add_constraint(Sense sense, LinExpr expr, double rhs, std::string tag);

  // 0 <= dual  perp  slack >= 0, linearized with a fresh binary b:
  //   dual <= Md * b,  slack <= Ms * (1 - b)
  // Md is min(big_M, ub(dual)) when finite; Ms is big_M.
  void add_complementarity(VarRef dual, LinExpr slack, std::string tag);

  // omega >= 0 and c^2 <= omega + M * (1 - relax); pass an invalid VarRef for
  // an unconditional c^2 <= omega.
  void add_convex_square_leq(VarRef c, VarRef omega, VarRef relax, std::string tag);

  void set_objective(LinExpr expr, bool maximize = false);

  SolveResult solve() { return solve(options_); }
  SolveResult solve(const SolverOptions& options);

  // --- introspection -----------------------------------------------------
  int num_vars() const { return static_cast<int>(lb_.size()); }
  int num_constraints() const { return static_cast<int>(cons_.size()); }
  VarKind var_kind(VarRef v) const;
  std::pair<double, double> var_bounds(VarRef v) const;
  void set_var_bounds(VarRef v, double lo, double hi);
  const std::string& constraint_tag(ConstraintRef c) const;
  Sense constraint_sense(ConstraintRef c) const;
  double constraint_rhs(ConstraintRef c) const;

  // LHS value of a constraint at a primal point (constant included).
  double eval_constraint(ConstraintRef c, const std::vector<double>& primal) const;
  // Signed violation (positive = infeasible) at a primal point.
  double violation(ConstraintRef c, const std::vector<double>& primal) const;

  const SolverOptions& options() const { return options_; }
  SolverOptions& options() { return options_; }

  CompiledModel compile(const SolverOptions& options) const;

 private:
  struct Con {
    Sense sense;
    LinExpr expr;
    double rhs;
    std::string tag;
  };
  struct CompPair {
    VarRef dual;
    LinExpr slack;
    double m_dual, m_slack;
    std::string tag;
  };
  struct QuadCon {
    VarRef c, omega, relax;
    std::string tag;
    mutable std::vector<double> tangents;  // refined across native-mode solves
  };

  void check_owned(const LinExpr& e) const;
  void check_owned(VarRef v) const;
  void run_audits(SolveResult& result) const;
  void recheck_feasibility(const SolveResult& result, const SolverOptions& options) const;

  std::int32_t id_;
  SolverOptions options_;
  std::vector<double> lb_, ub_;
  std::vector<VarKind> kind_;
  std::vector<Con> cons_;
  std::vector<CompPair> comp_pairs_;
  std::vector<QuadCon> quad_cons_;
  LinExpr objective_;
  bool maximize_ = false;
};

}  // namespace vppro
