#include "vppro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "vppro/backend.hpp"

namespace vppro {

namespace {

struct Component {
  int i, t;
};

long integer_budget(double g, const char* what) {
  const double r = std::round(g);
  if (std::abs(g - r) > 1e-9)
    throw TableError(std::string("oracle enumeration requires integer ") + what);
  return static_cast<long>(r);
}

// Free components and canonical values of the fixed ones for a selector z.
struct ComponentSplit {
  std::vector<Component> free;
  Mat base_v;  // fixed components at their canonical value; free ones at 0.5
};

ComponentSplit split_components(const NetworkCase& net, const ElasticityTable& table,
                                const std::vector<int>& z) {
  ComponentSplit cs;
  cs.base_v = Mat(net.num_nodes(), net.periods, 0.5);
  for (int i = 0; i < net.num_nodes(); ++i)
    for (int t = 0; t < net.periods; ++t) {
      const XiBounds& b = table.xi(i, t, z[t]);
      const bool has_load = net.nodes[i].load[t] > 0.0;
      const bool has_span = b.hi - b.lo > 0.0;
      if (has_load && has_span) cs.free.push_back({i, t});
      // fixed: load-free components sit at the budget-neutral midpoint;
      // degenerate spans are budget-neutral too and reported per the tie rule
    }
  return cs;
}

// DFS over {1/2, 0, 1} assignments of the free components with budget caps and
// the vertex condition (every midpoint component covered by a tight budget).
void enumerate_vertices(const ComponentSplit& cs, long gamma_t, long gamma_s, int I, int T,
                        long max_vertices, const std::function<void(const Mat&)>& emit) {
  const int n = static_cast<int>(cs.free.size());
  std::vector<double> assign(n, 0.5);
  std::vector<long> node_ext(I, 0), period_ext(T, 0);
  long emitted = 0;

  std::function<void(int)> rec = [&](int d) {
    if (d == n) {
      for (int q = 0; q < n; ++q)
        if (assign[q] == 0.5) {
          const Component& c = cs.free[q];
          const bool node_tight = node_ext[c.i] == gamma_t;
          const bool period_tight = period_ext[c.t] == gamma_s;
          if (!node_tight && !period_tight) return;  // midpoint off every tight row: not a vertex
        }
      if (++emitted > max_vertices) throw TableError("oracle enumeration too large");
      Mat v = cs.base_v;
      for (int q = 0; q < n; ++q) v.at(cs.free[q].i, cs.free[q].t) = assign[q];
      emit(v);
      return;
    }
    const Component& c = cs.free[d];
    // lexicographic value order for the deterministic tie rule: 0 < 0.5 < 1
    for (double val : {0.0, 0.5, 1.0}) {
      const bool extreme = val != 0.5;
      if (extreme && (node_ext[c.i] + 1 > gamma_t || period_ext[c.t] + 1 > gamma_s)) continue;
      assign[d] = val;
      if (extreme) {
        node_ext[c.i]++;
        period_ext[c.t]++;
      }
      rec(d + 1);
      if (extreme) {
        node_ext[c.i]--;
        period_ext[c.t]--;
      }
    }
    assign[d] = 0.5;
  };
  rec(0);
}

std::vector<std::vector<int>> selector_combos(const NetworkCase& net,
                                              const ElasticityTable& table,
                                              const std::vector<double>& c_tou, double tie_tol) {
  const int T = net.periods;
  std::vector<std::vector<int>> cands(T);
  long combos = 1;
  for (int t = 0; t < T; ++t) {
    cands[t] = interval_candidates(table, t, c_tou[t] / net.prices.c_ref[t], tie_tol);
    if (combos * static_cast<long>(cands[t].size()) > 1024)
      cands[t] = {cands[t].front()};  // enumeration cap; keep the lower interval
    combos *= static_cast<long>(cands[t].size());
  }
  std::vector<std::vector<int>> out;
  std::vector<int> z(T);
  std::function<void(int)> rec = [&](int t) {
    if (t == T) {
      out.push_back(z);
      return;
    }
    for (int k : cands[t]) {
      z[t] = k;
      rec(t + 1);
    }
  };
  rec(0);
  return out;
}

// Base second-stage LP (fixed x, xi = 0) compiled once; scenarios only patch
// the demand-row RHS.
struct InnerBase {
  CompiledModel base;
  std::vector<std::pair<int, SsRow>> demand_rows;  // model-row index, row meta
  SolverOptions options;

  CompiledModel instantiate(const NetworkCase& net, const std::vector<double>& c_tou,
                            const Mat& xi) const {
    CompiledModel cm = base;
    for (const auto& [ridx, row] : demand_rows) {
      const double rhs =
          row.rhs + row.load * (c_tou[row.xi_t] / net.prices.c_ref[row.xi_t] - 1.0) *
                        xi.at(row.xi_i, row.xi_t);
      cm.row_lo[ridx] = rhs;
      cm.row_hi[ridx] = rhs;
    }
    return cm;
  }
};

InnerBase make_inner_base(const NetworkCase& net, const SecondStageStructure& ss,
                          const FirstStageSolution& x, const OracleOptions& opts, bool phase1) {
  Model m(opts.solver);
  const SecondStageLayout& ly = ss.layout;
  std::vector<VarRef> y;
  for (int yi = 0; yi < ly.n_y(); ++yi) y.push_back(m.add_continuous(-kInf, kInf));
  InnerBase ib;
  ib.options = opts.solver;
  ib.options.want_duals = false;
  LinExpr slack_obj;
  int ridx = 0;
  for (const SsRow& row : ss.rows) {
    LinExpr e;
    for (const auto& [yi, coef] : row.y) e.add(y[yi], coef);
    double rhs = row.rhs;
    if (row.p0da_t >= 0) rhs += x.p0_da[row.p0da_t];
    if (phase1 && row.sense == Sense::ge) {
      const VarRef s = m.add_continuous(0.0, kInf);
      e += LinExpr(s);
      slack_obj += LinExpr(s);
    }
    m.add_constraint(row.sense, std::move(e), rhs, row.tag);
    if (row.xi_i >= 0) ib.demand_rows.emplace_back(ridx, row);
    ++ridx;
  }
  if (phase1) {
    m.set_objective(std::move(slack_obj), false);
  } else {
    const std::vector<double> E = second_stage_objective(net, ly, x.c_tou);
    LinExpr obj;
    for (int yi = 0; yi < ly.n_y(); ++yi)
      if (E[yi] != 0.0) obj += LinExpr(y[yi]) * E[yi];
    m.set_objective(std::move(obj), false);
  }
  ib.base = m.compile(ib.options);
  return ib;
}

OracleResult oracle_enumerate(const NetworkCase& net, const ElasticityTable& table,
                              const FirstStageSolution& x, const BudgetParams& budgets,
                              const OracleOptions& opts, bool phase1) {
  const SecondStageStructure ss = enumerate_second_stage(net, opts.polygon_sides);
  const InnerBase ib = make_inner_base(net, ss, x, opts, phase1);
  OracleResult res;

  for (const std::vector<int>& z : selector_combos(net, table, x.c_tou, opts.ratio_tie_tol)) {
    const std::vector<Mat> vertices = enumerate_budget_vertices(net, table, z, budgets, opts);
    constexpr size_t kChunk = 256;
    for (size_t base = 0; base < vertices.size(); base += kChunk) {
      const size_t hi = std::min(vertices.size(), base + kChunk);
      std::vector<CompiledModel> models;
      models.reserve(hi - base);
      for (size_t q = base; q < hi; ++q)
        models.push_back(ib.instantiate(net, x.c_tou, vertex_to_scenario(table, z, vertices[q])));
      const std::vector<BackendResult> solved = solve_batch(models, ib.options);
      for (size_t q = 0; q < solved.size(); ++q) {
        res.enumeration_count++;
        double value;
        if (solved[q].status == SolveStatus::optimal) {
          value = solved[q].objective;
        } else if (solved[q].status == SolveStatus::infeasible && !phase1) {
          value = kInf;
          if (!res.any_infeasible) {
            res.any_infeasible = true;
            res.infeasible_v = vertices[base + q];
            res.infeasible_z = z;
          }
        } else {
          throw BackendError("oracle inner LP status " +
                             std::string(to_string(solved[q].status)));
        }
        res.vertex_values.push_back(value);
        if (std::isfinite(value) && value > res.value + 1e-12) {
          res.value = value;
          res.v_arg = vertices[base + q];
          res.z_arg = z;
        }
      }
    }
  }
  if (!res.z_arg.empty())
    res.v_arg =
        scenario_to_vertex(table, res.z_arg, vertex_to_scenario(table, res.z_arg, res.v_arg));
  return res;
}

}  // namespace

std::vector<Mat> enumerate_budget_vertices(const NetworkCase& net, const ElasticityTable& table,
                                           const std::vector<int>& z, const BudgetParams& budgets,
                                           const OracleOptions& opts) {
  const ComponentSplit cs = split_components(net, table, z);
  if (static_cast<int>(cs.free.size()) > opts.max_components)
    throw TableError("instance too large for vertex enumeration (" +
                     std::to_string(cs.free.size()) + " free components)");
  const long gt = integer_budget(budgets.gamma_t, "gamma_t");
  const long gs = integer_budget(budgets.gamma_s, "gamma_s");
  std::vector<Mat> out;
  enumerate_vertices(cs, gt, gs, net.num_nodes(), net.periods, opts.max_vertices,
                     [&](const Mat& v) { out.push_back(v); });
  return out;
}

OracleResult oracle_worst_case(const NetworkCase& net, const ElasticityTable& table,
                               const FirstStageSolution& x, const BudgetParams& budgets,
                               const OracleOptions& opts) {
  return oracle_enumerate(net, table, x, budgets, opts, /*phase1=*/false);
}

OracleResult oracle_feasibility(const NetworkCase& net, const ElasticityTable& table,
                                const FirstStageSolution& x, const BudgetParams& budgets,
                                const OracleOptions& opts) {
  return oracle_enumerate(net, table, x, budgets, opts, /*phase1=*/true);
}

OracleResult oracle_full(const NetworkCase& net, const ElasticityTable& table,
                         int grid_points_per_period, const BudgetParams& budgets,
                         const OracleOptions& opts) {
  const int T = net.periods;
  if (T > 3) throw TableError("oracle_full supports T <= 3");
  if (grid_points_per_period < 2 || grid_points_per_period > 50)
    throw TableError("grid must have 2..50 points per period");
  const SecondStageStructure ss = enumerate_second_stage(net, opts.polygon_sides);
  const SecondStageLayout& ly = ss.layout;

  std::vector<double> grid;
  for (int g = 0; g < grid_points_per_period; ++g)
    grid.push_back(net.prices.tou_min + (net.prices.tou_max - net.prices.tou_min) * g /
                                            (grid_points_per_period - 1));

  const long total = static_cast<long>(std::pow(grid_points_per_period, T));
  OracleResult res;
  res.grid_values.assign(total, kInf);

  // one DE-LP per grid point: first stage with c pinned + all vertex recourse
  // copies (union across tie combos) + epigraph
  auto build_de = [&](const std::vector<double>& c) -> CompiledModel {
    Model m(opts.solver);
    FirstStageVars fs = build_first_stage(m, net, opts.polygon_sides);
    for (int t = 0; t < T; ++t) m.set_var_bounds(fs.c[t], c[t], c[t]);
    const VarRef eta = m.add_continuous(-kInf, kInf);
    const std::vector<double> E = second_stage_objective(net, ly, c);
    long copies = 0;
    for (const std::vector<int>& z : selector_combos(net, table, c, opts.ratio_tie_tol)) {
      for (const Mat& v : enumerate_budget_vertices(net, table, z, budgets, opts)) {
        const Mat xi = vertex_to_scenario(table, z, v);
        std::vector<VarRef> y;
        for (int yi = 0; yi < ly.n_y(); ++yi) y.push_back(m.add_continuous(-kInf, kInf));
        for (const SsRow& row : ss.rows) {
          LinExpr e;
          for (const auto& [yi, coef] : row.y) e.add(y[yi], coef);
          double rhs = row.rhs;
          if (row.xi_i >= 0)
            rhs += row.load * (c[row.xi_t] / net.prices.c_ref[row.xi_t] - 1.0) *
                   xi.at(row.xi_i, row.xi_t);
          if (row.p0da_t >= 0) e -= LinExpr(fs.p0[row.p0da_t]);
          m.add_constraint(row.sense, std::move(e), rhs,
                           row.tag + ",copy=" + std::to_string(copies));
        }
        LinExpr epi = LinExpr(eta);
        for (int yi = 0; yi < ly.n_y(); ++yi)
          if (E[yi] != 0.0) epi -= LinExpr(y[yi]) * E[yi];
        m.add_constraint(Sense::ge, std::move(epi), 0.0,
                         "oracle:epigraph,copy=" + std::to_string(copies));
        ++copies;
      }
    }
    m.set_objective(first_stage_cost(net, fs) + LinExpr(eta), false);
    SolverOptions o = opts.solver;
    o.want_duals = false;
    return m.compile(o);
  };

  std::vector<std::vector<double>> points(total, std::vector<double>(T));
  for (long g = 0; g < total; ++g) {
    long rem = g;
    for (int t = 0; t < T; ++t) {
      points[g][t] = grid[rem % grid_points_per_period];
      rem /= grid_points_per_period;
    }
  }

  SolverOptions batch_opts = opts.solver;
  batch_opts.want_duals = false;
  constexpr size_t kChunk = 32;
  for (long base = 0; base < total; base += kChunk) {
    const long hi = std::min<long>(total, base + kChunk);
    std::vector<CompiledModel> models;
    for (long g = base; g < hi; ++g) models.push_back(build_de(points[g]));
    const std::vector<BackendResult> solved = solve_batch(models, batch_opts);
    for (long g = base; g < hi; ++g) {
      const BackendResult& r = solved[g - base];
      if (r.status == SolveStatus::optimal) {
        res.grid_values[g] = r.objective;
        if (r.objective < res.grid_value - 1e-12) {
          res.grid_value = r.objective;
          res.c_arg = points[g];
        }
      } else if (r.status != SolveStatus::infeasible) {
        throw BackendError("oracle_full DE-LP status " + std::string(to_string(r.status)));
      }
    }
  }

  // grid error: half the largest finite adjacent jump along each period axis
  double err = 0;
  long stride = 1;
  for (int t = 0; t < T; ++t) {
    double axis_max = 0;
    for (long g = 0; g < total; ++g) {
      const long idx_t = (g / stride) % grid_points_per_period;
      if (idx_t + 1 >= grid_points_per_period) continue;
      const double a = res.grid_values[g], b = res.grid_values[g + stride];
      if (std::isfinite(a) && std::isfinite(b)) axis_max = std::max(axis_max, std::abs(a - b));
    }
    err += axis_max / 2.0;
    stride *= grid_points_per_period;
  }
  res.grid_error = err;
  res.value = res.grid_value;
  return res;
}

}  // namespace vppro
