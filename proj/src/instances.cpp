#include "vppro/instances.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace vppro {

namespace {

NetworkCase two_node_case(std::vector<double> load, double s_max, double gen_max) {
  NetworkCase net;
  net.periods = static_cast<int>(load.size());
  net.s_base_kva = 1.0;  // internal units equal kW on the micro cases
  NodeData root;
  root.id = 0;
  root.load.assign(net.periods, 0.0);
  root.v_min = root.v_max = 1.0;
  net.nodes.push_back(root);
  NodeData n1;
  n1.id = 1;
  n1.kappa = 0.3;
  n1.load = std::move(load);
  n1.p_min = 0;
  n1.p_max = gen_max;
  n1.q_min = -gen_max / 2;
  n1.q_max = gen_max / 2;
  n1.v_min = 0.95;
  n1.v_max = 1.05;
  n1.gen_cost = 0.04;
  net.nodes.push_back(n1);
  net.lines.push_back({0, 1, 1e-4, 2e-4, s_max});
  net.prices.rho_da.assign(net.periods, 0.10);
  net.prices.rho_up.assign(net.periods, 0.14);
  net.prices.rho_dn.assign(net.periods, 0.06);
  net.prices.c_ref.assign(net.periods, 0.10);
  net.prices.tou_min = 0.06;
  net.prices.tou_max = 0.18;
  return net;
}

ElasticityTable two_interval_table(int nodes, int periods, XiBounds low_side, XiBounds high_side,
                                   std::vector<int> elastic_nodes) {
  ElasticityTable table(nodes, periods, 2);
  for (int t = 0; t < periods; ++t) {
    table.interval(t, 0) = {0.5, 1.0};
    table.interval(t, 1) = {1.0, 2.0};
  }
  for (int i : elastic_nodes)
    for (int t = 0; t < periods; ++t) {
      table.xi(i, t, 0) = low_side;
      table.xi(i, t, 1) = high_side;
    }
  return table;
}

}  // namespace

Instance micro1() {
  Instance inst;
  inst.name = "micro1";
  inst.net = two_node_case({10.0}, 40.0, 5.0);
  inst.table = two_interval_table(2, 1, {-0.8, -0.2}, {-0.3, -0.05}, {1});
  inst.budgets = {1.0, 2.0};
  return inst;
}

Instance micro1_tight() {
  Instance inst = micro1();
  inst.name = "micro1_tight";
  // worst-case demand 10*(1+0.8*0.4) = 13.2 with at most 5 of local generation
  // needs 8.2 over the line; rating 7 leaves no feasible recourse
  inst.net.lines[0].s_max = 7.0;
  return inst;
}

Instance tiny_t2() {
  Instance inst;
  inst.name = "tiny_t2";
  inst.net = two_node_case({10.0, 14.0}, 45.0, 5.0);
  inst.net.prices.rho_da = {0.09, 0.12};
  inst.net.prices.rho_up = {0.13, 0.17};
  inst.net.prices.rho_dn = {0.05, 0.07};
  inst.table = two_interval_table(2, 2, {-0.8, -0.2}, {-0.3, -0.05}, {1});
  inst.budgets = {2.0, 2.0};
  return inst;
}

Instance tiny_i2() {
  Instance inst;
  inst.name = "tiny_i2";
  NetworkCase net = two_node_case({10.0}, 40.0, 5.0);
  NodeData n2;
  n2.id = 2;
  n2.kappa = 0.2;
  n2.load = {8.0};
  n2.v_min = 0.95;
  n2.v_max = 1.05;
  net.nodes.push_back(n2);
  net.lines.push_back({1, 2, 1.2e-4, 2e-4, 30.0});
  inst.net = std::move(net);
  inst.table = two_interval_table(3, 1, {-0.8, -0.2}, {-0.3, -0.05}, {1, 2});
  inst.budgets = {1.0, 3.0};
  inst.name = "tiny_i2";
  return inst;
}

Instance ddu_trap() {
  Instance inst;
  inst.name = "ddu_trap";
  inst.net = two_node_case({10.0}, 30.0, 0.0);
  inst.net.prices.rho_up.assign(1, 0.30);
  inst.net.prices.rho_dn.assign(1, 0.01);
  inst.net.prices.tou_min = 0.05;
  inst.net.prices.tou_max = 0.20;
  // weak response below the reference price, strong above: a scenario taken
  // at face value in the other interval badly mis-prices the demand
  inst.table = two_interval_table(2, 1, {-0.10, -0.05}, {-0.90, -0.80}, {1});
  inst.budgets = {1.0, 2.0};
  return inst;
}

Instance random_micro(std::uint64_t seed, const RandomMicroParams& params) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  auto pick_int = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  Instance inst;
  inst.name = "random_micro_" + std::to_string(seed);
  const int loads = pick_int(1, params.max_load_nodes);
  const int T = pick_int(1, params.max_periods);
  const int K = pick_int(1, params.max_intervals);

  NetworkCase net;
  net.periods = T;
  net.s_base_kva = 1.0;
  NodeData root;
  root.id = 0;
  root.load.assign(T, 0.0);
  root.v_min = root.v_max = 1.0;
  net.nodes.push_back(root);
  double total_peak = 0;
  for (int i = 1; i <= loads; ++i) {
    NodeData n;
    n.id = i;
    n.kappa = uniform(0.0, 0.4);
    for (int t = 0; t < T; ++t) n.load.push_back(uniform(5.0, 20.0));
    total_peak += *std::max_element(n.load.begin(), n.load.end());
    if (rng() % 2 == 0) {
      n.p_max = uniform(2.0, 10.0);
      n.q_min = -n.p_max / 2;
      n.q_max = n.p_max / 2;
      n.gen_cost = uniform(0.03, 0.08);
    }
    n.v_min = 0.9;
    n.v_max = 1.1;
    net.nodes.push_back(std::move(n));
    // star from the root keeps flows easy to reason about
    const double margin = params.allow_tight_lines && rng() % 3 == 0 ? uniform(0.55, 0.9)
                                                                     : uniform(1.8, 2.5);
    net.lines.push_back({0, i, uniform(1e-4, 6e-4), uniform(2e-4, 1e-3),
                         margin * net.nodes[i].load[0] * 1.6});
  }
  for (int t = 0; t < T; ++t) {
    const double rho = uniform(0.08, 0.12);
    net.prices.rho_da.push_back(rho);
    net.prices.rho_up.push_back(rho * uniform(1.2, 1.5));
    net.prices.rho_dn.push_back(rho * uniform(0.5, 0.8));
    net.prices.c_ref.push_back(0.10);
  }
  net.prices.tou_min = 0.05;
  net.prices.tou_max = 0.24;

  // interval ladder covering ratios [0.4, 2.5]
  std::vector<double> bounds;
  bounds.push_back(0.4);
  for (int k = 1; k < K; ++k) bounds.push_back(0.4 + (2.5 - 0.4) * k / K);
  bounds.push_back(2.5);
  ElasticityTable table(loads + 1, T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) table.interval(t, k) = {bounds[k], bounds[k + 1]};
  for (int i = 1; i <= loads; ++i)
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < K; ++k) {
        if (rng() % 8 == 0) {
          table.xi(i, t, k) = {0.0, 0.0};  // occasionally inelastic
        } else {
          const double lo = -uniform(0.3, 0.9);
          table.xi(i, t, k) = {lo, lo + uniform(0.05, -lo - 0.02 > 0.05 ? -lo - 0.02 : 0.05)};
        }
      }

  inst.net = std::move(net);
  inst.table = std::move(table);
  const int it = loads * T;
  if (params.allow_binding_budgets && rng() % 2 == 0) {
    inst.budgets.gamma_t = pick_int(0, T);
    inst.budgets.gamma_s = pick_int(0, loads);
  } else {
    inst.budgets.gamma_t = T;
    inst.budgets.gamma_s = loads + 1;
  }
  (void)it;
  inst.net.validate();
  inst.table.validate();
  return inst;
}

// --- IEEE-33 --------------------------------------------------------------------

NetworkCase ieee33_case(int periods) {
  // Baran & Wu 33-bus feeder: branch impedances in ohms, peak loads in kW /
  // kVAr (totals 3715 kW / 2300 kVAr), buses renumbered to 0-based ids.
  struct Branch {
    int from, to;
    double r_ohm, x_ohm;
  };
  static const std::array<Branch, 32> kBranches = {{
      {0, 1, 0.0922, 0.0470},   {1, 2, 0.4930, 0.2511},   {2, 3, 0.3660, 0.1864},
      {3, 4, 0.3811, 0.1941},   {4, 5, 0.8190, 0.7070},   {5, 6, 0.1872, 0.6188},
      {6, 7, 1.7114, 1.2351},   {7, 8, 1.0300, 0.7400},   {8, 9, 1.0440, 0.7400},
      {9, 10, 0.1966, 0.0650},  {10, 11, 0.3744, 0.1238}, {11, 12, 1.4680, 1.1550},
      {12, 13, 0.5416, 0.7129}, {13, 14, 0.5910, 0.5260}, {14, 15, 0.7463, 0.5450},
      {15, 16, 1.2890, 1.7210}, {16, 17, 0.7320, 0.5740}, {1, 18, 0.1640, 0.1565},
      {18, 19, 1.5042, 1.3554}, {19, 20, 0.4095, 0.4784}, {20, 21, 0.7089, 0.9373},
      {2, 22, 0.4512, 0.3083},  {22, 23, 0.8980, 0.7091}, {23, 24, 0.8960, 0.7011},
      {5, 25, 0.2030, 0.1034},  {25, 26, 0.2842, 0.1447}, {26, 27, 1.0590, 0.9337},
      {27, 28, 0.8042, 0.7006}, {28, 29, 0.5075, 0.2585}, {29, 30, 0.9744, 0.9630},
      {30, 31, 0.3105, 0.3619}, {31, 32, 0.3410, 0.5302},
  }};
  static const std::array<double, 32> kLoadP = {
      100, 90, 120, 60, 60, 200, 200, 60, 60, 45, 60, 60, 120, 60, 60, 60,
      90,  90, 90,  90, 90, 90,  420, 420, 60, 60, 60, 120, 200, 150, 210, 60};
  static const std::array<double, 32> kLoadQ = {
      60, 40, 80, 30, 20, 100, 100, 20, 20, 30, 35, 35, 80, 10, 20, 20,
      40, 40, 40, 40, 40, 50,  200, 200, 25, 25, 20, 70, 600, 70, 100, 40};
  static const std::array<double, 24> kProfile = {
      0.62, 0.58, 0.56, 0.55, 0.57, 0.62, 0.70, 0.80, 0.88, 0.92, 0.93, 0.94,
      0.92, 0.90, 0.88, 0.87, 0.90, 0.95, 1.00, 0.98, 0.92, 0.84, 0.74, 0.66};

  const double v_base_kv = 12.66;
  const double s_base_kva = 1000.0;
  const double z_base = v_base_kv * v_base_kv * 1000.0 / s_base_kva;  // ohm

  NetworkCase net;
  net.periods = periods;
  net.s_base_kva = s_base_kva;
  NodeData root;
  root.id = 0;
  root.load.assign(periods, 0.0);
  root.v_min = root.v_max = 1.0;
  net.nodes.push_back(root);
  for (int b = 0; b < 32; ++b) {
    NodeData n;
    n.id = b + 1;
    n.kappa = kLoadQ[b] / kLoadP[b];
    for (int t = 0; t < periods; ++t)
      n.load.push_back(kLoadP[b] * kProfile[t % kProfile.size()] / s_base_kva);
    n.v_min = 0.90;
    n.v_max = 1.10;
    net.nodes.push_back(std::move(n));
  }
  // three additional generators at nodes 2, 3, 6
  const std::array<std::pair<int, double>, 3> gens = {{{2, 1200.0}, {3, 1000.0}, {6, 800.0}}};
  const std::array<double, 3> cost = {0.055, 0.060, 0.065};
  for (size_t g = 0; g < gens.size(); ++g) {
    NodeData& n = net.nodes[gens[g].first];
    n.p_min = 0;
    n.p_max = gens[g].second / s_base_kva;
    n.q_min = -0.5 * n.p_max;
    n.q_max = 0.5 * n.p_max;
    n.gen_cost = cost[g];
  }
  for (const Branch& b : kBranches)
    net.lines.push_back({b.from, b.to, b.r_ohm / z_base, b.x_ohm / z_base, 0.0});

  // rate each line at 1.7x the peak downstream apparent load
  std::vector<double> down_p(33, 0.0), down_q(33, 0.0);
  for (int b = 0; b < 32; ++b) {
    down_p[b + 1] = kLoadP[b];
    down_q[b + 1] = kLoadQ[b];
  }
  for (int l = 31; l >= 0; --l) {  // child-before-parent in this numbering
    down_p[net.lines[l].from] += down_p[net.lines[l].to];
    down_q[net.lines[l].from] += down_q[net.lines[l].to];
  }
  for (LineData& l : net.lines) {
    const double s = std::hypot(down_p[l.to], down_q[l.to]);
    l.s_max = std::max(1.7 * s, 150.0) / s_base_kva;
  }

  for (int t = 0; t < periods; ++t) {
    const double p = kProfile[t % kProfile.size()];
    const double rho = 0.05 + 0.07 * (p - 0.55) / 0.45;
    net.prices.rho_da.push_back(rho);
    net.prices.rho_up.push_back(rho * 1.25);
    net.prices.rho_dn.push_back(rho * 0.60);
    net.prices.c_ref.push_back(0.10);
  }
  net.prices.tou_min = 0.05;
  net.prices.tou_max = 0.20;
  net.validate();
  return net;
}

// --- elasticity synthesis ----------------------------------------------------------

std::vector<double> ratio_boundaries(int intervals) {
  std::vector<double> ladder = {0.0, 0.25, 0.5, 1.0, 4.0, 16.0};
  while (static_cast<int>(ladder.size()) < intervals + 1) ladder.push_back(ladder.back() * 4.0);
  ladder.resize(intervals + 1);
  return ladder;
}

XiBounds class_archetype(const std::string& cls, int k, int intervals, double decay) {
  static const std::array<std::array<XiBounds, 5>, 3> kBase = {{
      // high-sensitive ([0.25,0.5] entry matches the reference distribution)
      {{{-0.98, -0.15}, {-0.97, -0.11}, {-0.80, -0.10}, {-0.60, -0.08}, {-0.35, -0.05}}},
      // mid-sensitive
      {{{-0.70, -0.10}, {-0.65, -0.08}, {-0.55, -0.06}, {-0.40, -0.05}, {-0.22, -0.03}}},
      // low-sensitive
      {{{-0.40, -0.05}, {-0.35, -0.04}, {-0.28, -0.03}, {-0.18, -0.02}, {-0.10, -0.01}}},
  }};
  int row;
  if (cls == "high") row = 0;
  else if (cls == "mid") row = 1;
  else if (cls == "low") row = 2;
  else throw TableError("unknown user class '" + cls + "'");
  XiBounds b = kBase[row][std::min(k, 4)];
  if (k > 4) {
    const double shrink = std::pow(0.8, k - 4);
    b.lo *= shrink;
    b.hi *= shrink;
  }
  if (decay > 0) {
    const auto bounds = ratio_boundaries(intervals);
    const double mid = 0.5 * (bounds[k] + bounds[k + 1]);
    const double f = 1.0 / (1.0 + decay * std::abs(mid - 1.0));
    b.lo *= f;
    b.hi *= f;
  }
  return b;
}

namespace {
const std::array<const char*, 3> kClasses = {"high", "mid", "low"};
}

ElasticityTable synth_elasticity(const NetworkCase& net, const GenDataParams& params) {
  std::mt19937_64 rng(params.seed);
  const auto bounds = ratio_boundaries(params.intervals);
  ElasticityTable table(net.num_nodes(), net.periods, params.intervals);
  for (int t = 0; t < net.periods; ++t)
    for (int k = 0; k < params.intervals; ++k)
      table.interval(t, k) = {bounds[k], bounds[k + 1]};
  for (int i = 0; i < net.num_nodes(); ++i) {
    const char* cls = kClasses[rng() % kClasses.size()];
    for (int t = 0; t < net.periods; ++t)
      for (int k = 0; k < params.intervals; ++k)
        table.xi(i, t, k) = class_archetype(cls, k, params.intervals, params.decay);
  }
  table.validate();
  return table;
}

void write_gen_data(const std::string& prefix, const GenDataParams& params,
                    const NetworkCase* net, int nodes) {
  const int n = net ? net->num_nodes() : nodes;
  if (n < 1) throw TableError("gen-data needs a case or a node count");
  std::mt19937_64 rng(params.seed);
  {
    std::ofstream map(prefix + "_classes.csv");
    if (!map) throw TableError("cannot write " + prefix + "_classes.csv");
    map << "node,class\n";
    for (int i = 0; i < n; ++i) map << i << "," << kClasses[rng() % kClasses.size()] << "\n";
  }
  {
    std::ofstream out(prefix + "_elasticity.csv");
    if (!out) throw TableError("cannot write " + prefix + "_elasticity.csv");
    out << "class,t,k,r_lo,r_hi,xi_lo,xi_hi\n";
    const auto bounds = ratio_boundaries(params.intervals);
    char buf[200];
    for (const char* cls : kClasses)
      for (int t = 0; t < params.periods; ++t)
        for (int k = 0; k < params.intervals; ++k) {
          const XiBounds b = class_archetype(cls, k, params.intervals, params.decay);
          std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.12g,%.12g,%.12g,%.12g\n", cls, t, k,
                        bounds[k], bounds[k + 1], b.lo, b.hi);
          out << buf;
        }
  }
  if (net) net->to_json_file(prefix + "_case.json");
}

Instance instance_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "micro1") return micro1();
  if (name == "micro1_tight") return micro1_tight();
  if (name == "tiny_t2") return tiny_t2();
  if (name == "tiny_i2") return tiny_i2();
  if (name == "ddu_trap") return ddu_trap();
  if (name == "ieee33") {
    Instance inst;
    inst.name = "ieee33";
    inst.net = ieee33_case(24);
    GenDataParams params;
    params.seed = seed;
    params.periods = 24;
    params.intervals = 5;
    inst.table = synth_elasticity(inst.net, params);
    inst.budgets = {24.0, 33.0};
    return inst;
  }
  throw TableError("unknown bundled instance '" + name + "'");
}

void write_instance_bundle(const Instance& inst, const std::string& dir) {
  std::filesystem::create_directories(dir);
  inst.net.to_json_file(dir + "/" + inst.name + ".case.json");
  inst.table.to_csv(dir + "/" + inst.name + ".elasticity.csv");
}

FirstStageSolution first_stage_dispatch(const NetworkCase& net, const std::vector<double>& c_tou,
                                        int polygon_sides, const SolverOptions& solver) {
  Model m(solver);
  FirstStageVars fs = build_first_stage(m, net, polygon_sides);
  for (int t = 0; t < net.periods; ++t) m.set_var_bounds(fs.c[t], c_tou[t], c_tou[t]);
  m.set_objective(first_stage_cost(net, fs), false);
  SolverOptions o = solver;
  o.want_duals = false;
  SolveResult res = m.solve(o);
  if (res.status != SolveStatus::optimal)
    throw ModelError("first-stage dispatch LP status " + std::string(to_string(res.status)));
  return extract_first_stage(net, fs, res);
}

}  // namespace vppro
