// vppro — robust day-ahead pricing and dispatch for a virtual power plant
// under price-elasticity uncertainty.
//
// Subcommands: solve, sweep-budgets, fixed-tou, compare, gen-data.
// Exit codes: 0 converged, 2 iteration limit, 3 bad inputs, 4 solver backend
// failure, 64 usage error.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vppro/backend.hpp"
#include "vppro/ccg.hpp"
#include "vppro/instances.hpp"
#include "vppro/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vppro;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIterLimit = 2;
constexpr int kExitBadInput = 3;
constexpr int kExitBackend = 4;
constexpr int kExitUsage = 64;

struct CommonArgs {
  std::string case_path, elasticity_path, classes_path, out_dir = "out";
  std::string budgets = "";
  int polygon_sides = 16;
  double tol = 1.0;
  std::string algorithm = "improved";
  int max_iters = 50;
  unsigned long long seed = 0;
  int jobs = 1;
  std::string quadratic = "native";
  double big_m = 1e4;
  double mip_gap = 1e-6;
  double time_limit = 0.0;
  double eta_floor = -1e6;
  double fc_tol = 1e-6;
  bool v_binary = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_inputs) {
  if (need_inputs) {
    cmd->add_option("--case", a.case_path, "network case JSON")->required();
    cmd->add_option("--elasticity", a.elasticity_path, "elasticity CSV")->required();
    cmd->add_option("--classes", a.classes_path, "node,class map for class-based CSVs");
    cmd->add_option("--budgets", a.budgets, "uncertainty budgets GT,GS (default: slack)");
  }
  cmd->add_option("--polygon-sides", a.polygon_sides, "inscribed polygon sides (>=3)");
  cmd->add_option("--tol", a.tol, "C&CG absolute gap tolerance ($)");
  cmd->add_option("--algorithm", a.algorithm, "improved|traditional");
  cmd->add_option("--max-iters", a.max_iters, "iteration cap");
  cmd->add_option("--seed", a.seed, "random seed recorded in outputs");
  cmd->add_option("--jobs", a.jobs, "parallel runs for sweeps");
  cmd->add_option("--quadratic", a.quadratic, "native | pwl:<breakpoints>");
  cmd->add_option("--big-m", a.big_m, "Big-M constant");
  cmd->add_option("--mip-gap", a.mip_gap, "relative MIP gap");
  cmd->add_option("--time-limit", a.time_limit, "per-solve time limit (s)");
  cmd->add_option("--eta-floor", a.eta_floor, "recourse floor for the cut-free master");
  cmd->add_option("--fc-tol", a.fc_tol, "feasibility-check slack threshold");
  cmd->add_flag("--v-binary", a.v_binary, "binary vertex coordinates");
  cmd->add_option("--out", a.out_dir, "output directory");
}

CcgConfig make_config(const CommonArgs& a, const NetworkCase& net) {
  CcgConfig cfg;
  cfg.tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.algorithm = a.algorithm == "traditional" ? CcgConfig::Algorithm::traditional
                                               : CcgConfig::Algorithm::improved;
  if (a.algorithm != "improved" && a.algorithm != "traditional")
    throw CLI::ValidationError("--algorithm must be improved or traditional");
  cfg.polygon_sides = a.polygon_sides;
  cfg.v_binary = a.v_binary;
  cfg.eta_floor = a.eta_floor;
  cfg.fc_tol = a.fc_tol;
  cfg.solver.big_M = a.big_m;
  cfg.solver.mip_gap = a.mip_gap;
  cfg.solver.time_limit = a.time_limit;
  if (a.quadratic == "native") {
    cfg.solver.quadratic_mode = QuadraticMode::native_convex_qc;
  } else if (a.quadratic.rfind("pwl:", 0) == 0) {
    cfg.solver.quadratic_mode = QuadraticMode::piecewise_linear;
    cfg.solver.breakpoints = std::stoi(a.quadratic.substr(4));
  } else {
    throw CLI::ValidationError("--quadratic must be native or pwl:<breakpoints>");
  }
  if (!a.budgets.empty()) {
    const auto comma = a.budgets.find(',');
    if (comma == std::string::npos)
      throw CLI::ValidationError("--budgets expects GT,GS");
    cfg.budgets.gamma_t = std::stod(a.budgets.substr(0, comma));
    cfg.budgets.gamma_s = std::stod(a.budgets.substr(comma + 1));
  } else {
    cfg.budgets.gamma_t = net.periods;
    cfg.budgets.gamma_s = net.num_nodes();
  }
  return cfg;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

json solution_json(const NetworkCase& net, const CcgState& state, const CcgConfig& cfg,
                   unsigned long long seed, double wall_s) {
  const double sb = net.s_base_kva;
  json j;
  j["status"] = to_string(state.status);
  j["objective"] = state.incumbent_ub;
  j["lb"] = state.lb;
  j["ub"] = state.ub;
  j["gap"] = state.ub - state.lb;
  j["iterations"] = state.iterations;
  j["algorithm"] = cfg.algorithm == CcgConfig::Algorithm::improved ? "improved" : "traditional";
  j["budgets"] = {{"gamma_t", cfg.budgets.gamma_t}, {"gamma_s", cfg.budgets.gamma_s}};
  j["seed"] = seed;
  j["c_tou"] = state.incumbent.c_tou;
  std::vector<double> p0_kw;
  for (double p : state.incumbent.p0_da) p0_kw.push_back(p * sb);
  j["p0_da_kw"] = p0_kw;
  json dispatch = json::object();
  for (int g : net.generator_nodes()) {
    std::vector<double> p_kw, q_kvar;
    for (int t = 0; t < net.periods; ++t) {
      p_kw.push_back(state.incumbent.p_da.rows ? state.incumbent.p_da.at(g, t) * sb : 0.0);
      q_kvar.push_back(state.incumbent.q_da.rows ? state.incumbent.q_da.at(g, t) * sb : 0.0);
    }
    dispatch["node_" + std::to_string(g)] = {{"p_da_kw", p_kw}, {"q_da_kvar", q_kvar}};
  }
  j["dispatch"] = dispatch;
  j["lb_exceeded_ub"] = state.lb_exceeded_ub;
  j["wall_time_s"] = wall_s;  // excluded from golden comparisons
  return j;
}

void write_worst_case_loads(const fs::path& path, const NetworkCase& net,
                            const ElasticityTable& table, const CcgState& state) {
  std::ostringstream out;
  out << "scenario,node,t,predicted_kw,worst_case_kw\n";
  if (!state.incumbent.c_tou.empty()) {
    std::vector<Scenario> all = state.scenarios;
    if (state.has_last_worst) all.push_back(state.last_worst);
    // remap every stored vertex to the incumbent's active intervals
    std::vector<int> z_inc(net.periods);
    for (int t = 0; t < net.periods; ++t)
      z_inc[t] = interval_lookup(table, t,
                                 state.incumbent.c_tou[t] / net.prices.c_ref[t]);
    char buf[200];
    for (size_t m = 0; m < all.size(); ++m) {
      const Mat xi = vertex_to_scenario(table, z_inc, all[m].v);
      for (int i = 0; i < net.num_nodes(); ++i)
        for (int t = 0; t < net.periods; ++t) {
          const double L = net.nodes[i].load[t] * net.s_base_kva;
          const double l = realized_demand(net.nodes[i].load[t], xi.at(i, t),
                                           state.incumbent.c_tou[t], net.prices.c_ref[t]) *
                           net.s_base_kva;
          std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.9g,%.9g\n", m, i, t, L, l);
          out << buf;
        }
    }
  }
  write_atomic(path, out.str());
}

struct LoadedInputs {
  NetworkCase net;
  ElasticityTable table;
};

LoadedInputs load_inputs(const CommonArgs& a) {
  LoadedInputs in;
  in.net = NetworkCase::from_json_file(a.case_path);
  for (const std::string& w : in.net.validate()) std::cerr << "[warn] " << w << "\n";
  std::optional<std::string> classes;
  if (!a.classes_path.empty()) classes = a.classes_path;
  in.table = ElasticityTable::from_csv(a.elasticity_path, in.net.num_nodes(), in.net.periods,
                                       classes);
  return in;
}

struct RunOutput {
  CcgState state;
  double wall_s = 0;
};

RunOutput run_once(const LoadedInputs& in, const CcgConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CcgSolver solver(in.net, in.table, cfg);
  RunOutput out;
  out.state = solver.run();
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

int state_exit_code(const CcgState& state) {
  switch (state.status) {
    case CcgStatus::converged: return kExitOk;
    case CcgStatus::iteration_limit: return kExitIterLimit;
    case CcgStatus::solver_failure: return kExitBackend;
  }
  return kExitBackend;
}

void write_bundle(const fs::path& dir, const LoadedInputs& in, const CcgConfig& cfg,
                  const RunOutput& run, unsigned long long seed) {
  fs::create_directories(dir);
  write_atomic(dir / "solution.json",
               solution_json(in.net, run.state, cfg, seed, run.wall_s).dump(2) + "\n");
  write_iterations_csv((dir / "iterations.csv").string(), run.state);
  write_worst_case_loads(dir / "worst_case_loads.csv", in.net, in.table, run.state);
}

int cmd_solve(const CommonArgs& a) {
  const LoadedInputs in = load_inputs(a);
  const CcgConfig cfg = make_config(a, in.net);
  const RunOutput run = run_once(in, cfg);
  write_bundle(a.out_dir, in, cfg, run, a.seed);
  if (run.state.status == CcgStatus::solver_failure)
    std::cerr << "solver failure: " << run.state.failure_message << "\n";
  std::cout << "status=" << to_string(run.state.status) << " objective=" << run.state.incumbent_ub
            << " lb=" << run.state.lb << " iterations=" << run.state.iterations << "\n";
  return state_exit_code(run.state);
}

int cmd_sweep_budgets(const CommonArgs& a, const std::string& budget_list) {
  const LoadedInputs in = load_inputs(a);
  std::vector<BudgetParams> budgets;
  std::stringstream ss(budget_list);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("--budget-list expects GT,GS;GT,GS");
    budgets.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
  }
  if (budgets.empty()) throw CLI::ValidationError("--budget-list is empty");

  struct Row {
    BudgetParams b;
    RunOutput run;
  };
  std::vector<Row> rows(budgets.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t idx; (idx = next.fetch_add(1)) < budgets.size();) {
      CcgConfig cfg = make_config(a, in.net);
      cfg.budgets = budgets[idx];
      rows[idx] = {budgets[idx], run_once(in, cfg)};
      CcgConfig bundle_cfg = cfg;
      const fs::path dir = fs::path(a.out_dir) / ("budgets_" +
                                                  std::to_string(budgets[idx].gamma_t) + "_" +
                                                  std::to_string(budgets[idx].gamma_s));
      write_bundle(dir, in, bundle_cfg, rows[idx].run, a.seed);
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::max(1, a.jobs); ++j) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();

  fs::create_directories(a.out_dir);
  std::ostringstream out;
  out << "gamma_t,gamma_s,objective,time_s,iterations,status\n";
  char buf[200];
  int exit_code = kExitOk;
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.9f,%.3f,%d,%s\n", r.b.gamma_t, r.b.gamma_s,
                  r.run.state.incumbent_ub, r.run.wall_s, r.run.state.iterations,
                  to_string(r.run.state.status));
    out << buf;
    exit_code = std::max(exit_code, state_exit_code(r.run.state));
  }
  write_atomic(fs::path(a.out_dir) / "summary.csv", out.str());
  std::cout << out.str();
  return exit_code;
}

int cmd_fixed_tou(const CommonArgs& a, const std::string& multipliers) {
  const LoadedInputs in = load_inputs(a);
  std::vector<double> mults;
  std::stringstream ss(multipliers);
  std::string item;
  while (std::getline(ss, item, ',')) mults.push_back(std::stod(item));

  std::ostringstream out;
  out << "c_tou,objective,time_s,iterations,status\n";
  char buf[240];
  int exit_code = kExitOk;

  {
    const CcgConfig cfg = make_config(a, in.net);
    const RunOutput run = run_once(in, cfg);
    write_bundle(fs::path(a.out_dir) / "optimized", in, cfg, run, a.seed);
    std::snprintf(buf, sizeof(buf), "optimized,%.9f,%.3f,%d,%s\n", run.state.incumbent_ub,
                  run.wall_s, run.state.iterations, to_string(run.state.status));
    out << buf;
    exit_code = std::max(exit_code, state_exit_code(run.state));
  }
  for (double mult : mults) {
    std::vector<double> c(in.net.periods);
    bool covered = true;
    for (int t = 0; t < in.net.periods; ++t) {
      c[t] = mult * in.net.prices.c_ref[t];
      try {
        interval_lookup(in.table, t, mult);
      } catch (const OutOfCoverageError&) {
        covered = false;
      }
    }
    if (!covered) {
      std::snprintf(buf, sizeof(buf), "%gx,,,,OutOfCoverage\n", mult);
      out << buf;
      continue;
    }
    CcgConfig cfg = make_config(a, in.net);
    cfg.fixed_c = c;
    const RunOutput run = run_once(in, cfg);
    write_bundle(fs::path(a.out_dir) / ("fixed_" + std::to_string(mult)), in, cfg, run, a.seed);
    std::snprintf(buf, sizeof(buf), "%gx,%.9f,%.3f,%d,%s\n", mult, run.state.incumbent_ub,
                  run.wall_s, run.state.iterations, to_string(run.state.status));
    out << buf;
    exit_code = std::max(exit_code, state_exit_code(run.state));
  }
  fs::create_directories(a.out_dir);
  write_atomic(fs::path(a.out_dir) / "summary.csv", out.str());
  std::cout << out.str();
  return exit_code;
}

int cmd_compare(const CommonArgs& a) {
  const LoadedInputs in = load_inputs(a);
  CcgConfig cfg_imp = make_config(a, in.net);
  cfg_imp.algorithm = CcgConfig::Algorithm::improved;
  CcgConfig cfg_trad = cfg_imp;
  cfg_trad.algorithm = CcgConfig::Algorithm::traditional;

  const RunOutput run_imp = run_once(in, cfg_imp);
  write_bundle(fs::path(a.out_dir) / "improved", in, cfg_imp, run_imp, a.seed);
  const RunOutput run_trad = run_once(in, cfg_trad);
  write_bundle(fs::path(a.out_dir) / "traditional", in, cfg_trad, run_trad, a.seed);

  json verdict;
  verdict["improved"] = {{"status", to_string(run_imp.state.status)},
                         {"objective", run_imp.state.incumbent_ub},
                         {"gap", run_imp.state.ub - run_imp.state.lb},
                         {"iterations", run_imp.state.iterations}};
  verdict["traditional"] = {{"status", to_string(run_trad.state.status)},
                            {"objective", run_trad.state.incumbent_ub},
                            {"gap", run_trad.state.ub - run_trad.state.lb},
                            {"iterations", run_trad.state.iterations},
                            {"lb_exceeded_ub", run_trad.state.lb_exceeded_ub}};
  const bool trad_failed = run_trad.state.status != CcgStatus::converged ||
                           run_trad.state.lb_exceeded_ub;
  verdict["verdict"] = run_imp.state.status == CcgStatus::converged && trad_failed
                           ? "improved converged; traditional failed to"
                           : "see bundles";
  fs::create_directories(a.out_dir);
  write_atomic(fs::path(a.out_dir) / "verdict.json", verdict.dump(2) + "\n");
  std::cout << verdict.dump(2) << "\n";
  return state_exit_code(run_imp.state);
}

int cmd_gen_data(const CommonArgs& a, int nodes, bool ieee33, double decay, int intervals,
                 int periods, const std::string& bundle) {
  GenDataParams params;
  params.seed = a.seed;
  params.periods = periods;
  params.intervals = intervals;
  params.decay = decay;
  fs::create_directories(fs::path(a.out_dir));
  if (!bundle.empty()) {
    const Instance inst = instance_by_name(bundle, a.seed);
    write_instance_bundle(inst, a.out_dir);
    std::cout << "wrote " << a.out_dir << "/" << inst.name << ".case.json and .elasticity.csv\n";
    return kExitOk;
  }
  const std::string prefix = (fs::path(a.out_dir) / "gen").string();
  if (ieee33) {
    const NetworkCase net = ieee33_case(periods);
    write_gen_data(prefix, params, &net, net.num_nodes());
  } else if (!a.case_path.empty()) {
    const NetworkCase net = NetworkCase::from_json_file(a.case_path);
    write_gen_data(prefix, params, &net, net.num_nodes());
  } else {
    write_gen_data(prefix, params, nullptr, nodes);
  }
  std::cout << "wrote " << prefix << "_elasticity.csv, " << prefix << "_classes.csv"
            << (ieee33 || !a.case_path.empty() ? ", " + prefix + "_case.json" : "") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust VPP day-ahead pricing under decision-dependent elasticity uncertainty"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string budget_list, multipliers = "1,2,5";
  int gen_nodes = 33;
  bool gen_ieee33 = false;
  double gen_decay = 0.0;
  int gen_intervals = 5, gen_periods = 24;
  std::string gen_bundle;

  CLI::App* solve = app.add_subcommand("solve", "run the robust solver on a case");
  add_common(solve, a, true);
  CLI::App* sweep = app.add_subcommand("sweep-budgets", "one run per (GT,GS) pair");
  add_common(sweep, a, true);
  sweep->add_option("--budget-list", budget_list, "semicolon-separated GT,GS pairs")->required();
  CLI::App* fixed = app.add_subcommand("fixed-tou", "fixed TOU multipliers vs optimized");
  add_common(fixed, a, true);
  fixed->add_option("--multipliers", multipliers, "comma-separated C_REF multipliers");
  CLI::App* compare = app.add_subcommand("compare", "improved vs traditional C&CG");
  add_common(compare, a, true);
  CLI::App* gen = app.add_subcommand("gen-data", "synthesize elasticity data (and cases)");
  add_common(gen, a, false);
  gen->add_option("--case", a.case_path, "emit data for an existing case");
  gen->add_option("--nodes", gen_nodes, "node count when no case is given");
  gen->add_flag("--ieee33", gen_ieee33, "emit the bundled IEEE-33 feeder case");
  gen->add_option("--decay", gen_decay, "elasticity magnitude decay with |ratio-1|");
  gen->add_option("--intervals", gen_intervals, "ratio interval count");
  gen->add_option("--periods", gen_periods, "period count");
  gen->add_option("--bundle", gen_bundle,
                  "emit a named bundled instance (micro1|micro1_tight|tiny_t2|tiny_i2|ddu_trap|ieee33)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(a);
    if (sweep->parsed()) return cmd_sweep_budgets(a, budget_list);
    if (fixed->parsed()) return cmd_fixed_tou(a, multipliers);
    if (compare->parsed()) return cmd_compare(a);
    if (gen->parsed()) return cmd_gen_data(a, gen_nodes, gen_ieee33, gen_decay, gen_intervals,
                                           gen_periods, gen_bundle);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CaseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const TableError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const BackendError& e) {
    std::cerr << "solver backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitUsage;
}
