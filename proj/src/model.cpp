#include "vppro/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "vppro/backend.hpp"

namespace vppro {

namespace {
constexpr double kCoefDropTol = 1e-12;
std::atomic<std::int32_t> g_next_model_id{0};
}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::limit: return "limit";
  }
  return "?";
}

// --- LinExpr -----------------------------------------------------------------

void LinExpr::add(VarRef v, double coef) {
  if (!v.valid()) throw ModelError("LinExpr::add: invalid VarRef");
  terms_.emplace_back(v, coef);
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (const auto& [v, c] : o.terms_) terms_.emplace_back(v, -c);
  constant_ -= o.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& [v, c] : terms_) c *= s;
  constant_ *= s;
  return *this;
}

void LinExpr::canonicalize() {
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const auto& a, const auto& b) { return a.first.index < b.first.index; });
  std::vector<std::pair<VarRef, double>> merged;
  merged.reserve(terms_.size());
  for (const auto& [v, c] : terms_) {
    if (!merged.empty() && merged.back().first == v) {
      merged.back().second += c;
    } else {
      merged.emplace_back(v, c);
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const auto& t) { return std::abs(t.second) < kCoefDropTol; }),
               merged.end());
  terms_ = std::move(merged);
}

bool LinExpr::finite() const {
  if (!std::isfinite(constant_)) return false;
  for (const auto& [v, c] : terms_)
    if (!std::isfinite(c)) return false;
  return true;
}

// --- Model -------------------------------------------------------------------

Model::Model(SolverOptions options) : id_(g_next_model_id++), options_(options) {
  if (options_.big_M <= 0) throw InvalidBoundsError("big_M must be positive");
  if (options_.quadratic_mode == QuadraticMode::piecewise_linear && options_.breakpoints < 2)
    throw InvalidBoundsError("piecewise mode needs >= 2 breakpoints");
}

VarRef Model::add_variable(VarKind kind, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi)
    throw InvalidBoundsError("invalid variable bounds [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
  if (kind == VarKind::binary && (lo < 0.0 || hi > 1.0))
    throw InvalidBoundsError("binary bounds must lie within [0,1]");
  lb_.push_back(lo);
  ub_.push_back(hi);
  kind_.push_back(kind);
  return VarRef{id_, static_cast<std::int32_t>(lb_.size() - 1)};
}

void Model::check_owned(VarRef v) const {
  if (v.model != id_ || v.index < 0 || v.index >= num_vars())
    throw ForeignVariableError("VarRef does not belong to this model");
}

void Model::check_owned(const LinExpr& e) const {
  for (const auto& [v, c] : e.terms()) check_owned(v);
}

ConstraintRef Model::add_constraint(Sense sense, LinExpr expr, double rhs, std::string tag) {
  if (tag.empty()) throw ModelError("constraint requires a nonempty provenance tag");
  check_owned(expr);
  expr.canonicalize();
  if (!expr.finite() || !std::isfinite(rhs))
    throw ModelError("non-finite coefficient in constraint '" + tag + "'");
  cons_.push_back(Con{sense, std::move(expr), rhs, std::move(tag)});
  return ConstraintRef{id_, static_cast<std::int32_t>(cons_.size() - 1)};
}

void Model::add_complementarity(VarRef dual, LinExpr slack, std::string tag) {
  check_owned(dual);
  check_owned(slack);
  slack.canonicalize();
  // dual >= 0 via its bound; slack >= 0 as a row
  if (lb_[dual.index] < 0.0) lb_[dual.index] = 0.0;
  double m_dual = options_.big_M;
  if (std::isfinite(ub_[dual.index])) m_dual = std::min(m_dual, ub_[dual.index]);
  const double m_slack = options_.big_M;

  add_constraint(Sense::ge, slack, 0.0, tag + ":slack_nn");
  VarRef b = add_binary();
  // dual <= m_dual * b
  add_constraint(Sense::le, LinExpr(dual) - LinExpr(b) * m_dual, 0.0, tag + ":dual_bigM");
  // slack <= m_slack * (1 - b)
  add_constraint(Sense::le, slack + LinExpr(b) * m_slack, m_slack, tag + ":slack_bigM");
  comp_pairs_.push_back(CompPair{dual, std::move(slack), m_dual, m_slack, std::move(tag)});
}

void Model::add_convex_square_leq(VarRef c, VarRef omega, VarRef relax, std::string tag) {
  check_owned(c);
  check_owned(omega);
  if (relax.valid()) {
    check_owned(relax);
    if (kind_[relax.index] != VarKind::binary)
      throw ModelError("relax var of a convex square constraint must be binary");
  }
  if (lb_[omega.index] < 0.0) lb_[omega.index] = 0.0;  // omega >= 0
  quad_cons_.push_back(QuadCon{c, omega, relax, std::move(tag), {}});
}

void Model::set_objective(LinExpr expr, bool maximize) {
  check_owned(expr);
  expr.canonicalize();
  objective_ = std::move(expr);
  maximize_ = maximize;
}

VarKind Model::var_kind(VarRef v) const {
  check_owned(v);
  return kind_[v.index];
}

std::pair<double, double> Model::var_bounds(VarRef v) const {
  check_owned(v);
  return {lb_[v.index], ub_[v.index]};
}

void Model::set_var_bounds(VarRef v, double lo, double hi) {
  check_owned(v);
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw InvalidBoundsError("invalid bounds");
  lb_[v.index] = lo;
  ub_[v.index] = hi;
}

const std::string& Model::constraint_tag(ConstraintRef c) const {
  return cons_.at(static_cast<size_t>(c.index)).tag;
}
Sense Model::constraint_sense(ConstraintRef c) const {
  return cons_.at(static_cast<size_t>(c.index)).sense;
}
double Model::constraint_rhs(ConstraintRef c) const {
  return cons_.at(static_cast<size_t>(c.index)).rhs;
}

double Model::eval_constraint(ConstraintRef c, const std::vector<double>& primal) const {
  const Con& con = cons_.at(static_cast<size_t>(c.index));
  double lhs = con.expr.constant();
  for (const auto& [v, coef] : con.expr.terms()) lhs += coef * primal.at(static_cast<size_t>(v.index));
  return lhs;
}

double Model::violation(ConstraintRef c, const std::vector<double>& primal) const {
  const Con& con = cons_.at(static_cast<size_t>(c.index));
  const double lhs = eval_constraint(c, primal);
  switch (con.sense) {
    case Sense::le: return lhs - con.rhs;
    case Sense::ge: return con.rhs - lhs;
    case Sense::eq: return std::abs(lhs - con.rhs);
  }
  return 0.0;
}

CompiledModel Model::compile(const SolverOptions& options) const {
  CompiledModel cm;
  cm.nv = num_vars();
  cm.lb = lb_;
  cm.ub = ub_;
  cm.obj.assign(cm.nv, 0.0);
  const double sign = maximize_ ? -1.0 : 1.0;  // backends always minimize
  for (const auto& [v, c] : objective_.terms()) cm.obj[v.index] += sign * c;
  cm.obj_constant = sign * objective_.constant();
  cm.maximize = maximize_;
  for (int i = 0; i < cm.nv; ++i)
    if (kind_[i] == VarKind::binary) cm.integer_vars.push_back(i);

  auto push_row = [&cm](const LinExpr& e, double lo, double hi, const std::string& name) {
    cm.a_start.push_back(static_cast<std::int64_t>(cm.a_col.size()));
    for (const auto& [v, c] : e.terms()) {
      cm.a_col.push_back(v.index);
      cm.a_val.push_back(c);
    }
    cm.row_lo.push_back(lo - e.constant());
    cm.row_hi.push_back(hi - e.constant());
    cm.row_name.push_back(name);
  };

  for (const Con& con : cons_) {
    double lo = -kInf, hi = kInf;
    if (con.sense == Sense::le) hi = con.rhs;
    else if (con.sense == Sense::ge) lo = con.rhs;
    else lo = hi = con.rhs;
    push_row(con.expr, lo, hi, con.tag);
  }
  cm.n_model_rows = static_cast<int>(cm.row_lo.size());

  // tangent rows for the convex square constraints:
  //   2*b*c - b^2 <= omega + M*(1-z)   for each tangent point b
  for (const QuadCon& qc : quad_cons_) {
    std::vector<double> points;
    if (options.quadratic_mode == QuadraticMode::piecewise_linear) {
      const double lo = lb_[qc.c.index], hi = ub_[qc.c.index];
      if (!std::isfinite(lo) || !std::isfinite(hi))
        throw ModelError("piecewise quadratic mode requires bounded domain for '" + qc.tag + "'");
      const int n = options.breakpoints;
      for (int i = 0; i < n; ++i) points.push_back(lo + (hi - lo) * i / (n - 1));
    } else {
      const double lo = lb_[qc.c.index], hi = ub_[qc.c.index];
      if (std::isfinite(lo)) points.push_back(lo);
      if (std::isfinite(hi) && hi != lo) points.push_back(hi);
      if (points.empty()) points.push_back(0.0);
      points.insert(points.end(), qc.tangents.begin(), qc.tangents.end());
    }
    for (double b : points) {
      LinExpr row = LinExpr(qc.c) * (2.0 * b) - LinExpr(qc.omega);
      double rhs = b * b;
      if (qc.relax.valid()) {
        row += LinExpr(qc.relax) * options.big_M;
        rhs += options.big_M;
      }
      row.canonicalize();
      push_row(row, -kInf, rhs, qc.tag + ":tangent");
    }
  }
  cm.a_start.push_back(static_cast<std::int64_t>(cm.a_col.size()));
  return cm;
}

SolveResult Model::solve(const SolverOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  SolverBackend& backend = default_backend();
  const bool adaptive = options.quadratic_mode == QuadraticMode::native_convex_qc &&
                        !quad_cons_.empty();
  constexpr double kQcTol = 1e-9;
  constexpr int kMaxRounds = 40;

  BackendResult br;
  for (int round = 0;; ++round) {
    br = backend.solve(compile(options), options);
    if (!adaptive || !br.solved) break;
    bool violated = false;
    for (const QuadCon& qc : quad_cons_) {
      const double c = br.primal[qc.c.index];
      const double omega = br.primal[qc.omega.index];
      double rhs = omega;
      if (qc.relax.valid())
        rhs += options.big_M * (br.primal[qc.relax.index] > 0.5 ? 0.0 : 1.0);
      if (c * c - rhs > kQcTol) {
        bool fresh = true;
        for (double p : qc.tangents)
          if (std::abs(p - c) < 1e-12) fresh = false;
        if (fresh) {
          qc.tangents.push_back(c);
          violated = true;
        }
      }
    }
    if (!violated) break;
    if (round >= kMaxRounds)
      throw BackendError("convex-square outer approximation failed to converge");
  }

  SolveResult result;
  result.status = br.status;
  result.gap = br.gap;
  if (br.solved) {
    result.primal = br.primal;
    // snap binaries onto {0,1}: integrality dust would otherwise be amplified
    // by big-M terms in the recheck and audits
    for (int i = 0; i < num_vars(); ++i)
      if (kind_[i] == VarKind::binary)
        result.primal[i] = result.primal[i] > 0.5 ? 1.0 : 0.0;
    // evaluate the objective from the model's own expression (restores the
    // constant term and the original optimization sense)
    double obj = objective_.constant();
    for (const auto& [v, c] : objective_.terms()) obj += c * result.primal[v.index];
    result.objective = obj;
    if (!br.dual.empty() && cons_.size() <= br.dual.size()) {
      result.dual.assign(br.dual.begin(), br.dual.begin() + static_cast<long>(cons_.size()));
      if (maximize_)
        for (double& d : result.dual) d = -d;
    }
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (result.status == SolveStatus::optimal) {
    recheck_feasibility(result, options);
    run_audits(result);
  }
  return result;
}

void Model::recheck_feasibility(const SolveResult& result, const SolverOptions& options) const {
  const double base_tol = std::max(options.feas_tol, 1e-7);
  for (size_t i = 0; i < cons_.size(); ++i) {
    const Con& con = cons_[i];
    double lhs = con.expr.constant();
    double scale = 1.0 + std::abs(con.rhs);
    for (const auto& [v, c] : con.expr.terms()) {
      const double t = c * result.primal[v.index];
      lhs += t;
      scale = std::max(scale, std::abs(t));
    }
    double viol = 0.0;
    if (con.sense == Sense::le) viol = lhs - con.rhs;
    else if (con.sense == Sense::ge) viol = con.rhs - lhs;
    else viol = std::abs(lhs - con.rhs);
    if (viol > base_tol * scale * 10.0)
      throw ModelError("feasibility recheck failed on '" + con.tag + "' (violation " +
                       std::to_string(viol) + ")");
  }
  if (options.quadratic_mode == QuadraticMode::native_convex_qc) {
    for (const QuadCon& qc : quad_cons_) {
      const double c = result.primal[qc.c.index];
      double rhs = result.primal[qc.omega.index];
      if (qc.relax.valid()) rhs += options.big_M * (1.0 - result.primal[qc.relax.index]);
      if (c * c - rhs > 1e-7 * (1.0 + c * c))
        throw ModelError("quadratic recheck failed on '" + qc.tag + "'");
    }
  }
}

void Model::run_audits(SolveResult& result) const {
  for (const CompPair& pair : comp_pairs_) {
    const double dual = result.primal[pair.dual.index];
    double slack = pair.slack.constant();
    for (const auto& [v, c] : pair.slack.terms()) slack += c * result.primal[v.index];
    if (std::abs(dual) >= 0.99 * pair.m_dual && pair.m_dual == options_.big_M)
      result.diagnostics.push_back({DiagnosticKind::big_m_violation, pair.tag + ":dual", dual});
    if (std::abs(slack) >= 0.99 * pair.m_slack)
      result.diagnostics.push_back({DiagnosticKind::big_m_violation, pair.tag + ":slack", slack});
    if (dual * slack > options_.feas_tol * options_.big_M)
      result.diagnostics.push_back(
          {DiagnosticKind::complementarity_residual, pair.tag, dual * slack});
  }
}

}  // namespace vppro
