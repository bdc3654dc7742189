#include "vppro/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vppro {

using nlohmann::json;

namespace {
constexpr double kPi = 3.14159265358979323846;

std::string line_tag(const NetworkCase& net, int line) {
  return std::to_string(net.lines[line].from) + "->" + std::to_string(net.lines[line].to);
}
}  // namespace

std::vector<int> NetworkCase::generator_nodes() const {
  std::vector<int> out;
  for (const NodeData& n : nodes)
    if (n.id != 0 && n.has_generator()) out.push_back(n.id);
  return out;
}

std::vector<std::vector<int>> NetworkCase::children_lines() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (size_t l = 0; l < lines.size(); ++l) out[lines[l].from].push_back(static_cast<int>(l));
  return out;
}

std::vector<int> NetworkCase::parent_lines() const {
  std::vector<int> out(nodes.size(), -1);
  for (size_t l = 0; l < lines.size(); ++l) out[lines[l].to] = static_cast<int>(l);
  return out;
}

std::vector<std::string> NetworkCase::validate() const {
  std::vector<std::string> warnings;
  if (periods < 1) throw CaseError("periods must be >= 1");
  if (nodes.empty()) throw CaseError("case has no nodes");
  for (size_t i = 0; i < nodes.size(); ++i) {
    const NodeData& n = nodes[i];
    if (n.id != static_cast<int>(i))
      throw CaseError("node ids must be 0..n-1 in order (node " + std::to_string(n.id) + ")");
    if (static_cast<int>(n.load.size()) != periods)
      throw CaseError("node " + std::to_string(n.id) + ": load must have `periods` entries");
    for (double L : n.load)
      if (L < 0 || !std::isfinite(L)) throw CaseError("node loads must be finite and >= 0");
    if (!std::isfinite(n.kappa)) throw CaseError("kappa must be finite");
    if (n.p_min > n.p_max || n.q_min > n.q_max || n.v_min > n.v_max)
      throw CaseError("node " + std::to_string(n.id) + ": unordered bounds");
  }
  if (lines.size() != nodes.size() - 1)
    throw CaseError("radial tree requires lines == nodes - 1");
  std::vector<int> indeg(nodes.size(), 0);
  for (const LineData& l : lines) {
    if (l.from < 0 || l.to < 0 || l.from >= num_nodes() || l.to >= num_nodes())
      throw CaseError("line endpoint out of range");
    if (l.r < 0 || l.x < 0 || l.s_max <= 0) throw CaseError("line parameters must satisfy r,x >= 0, s_max > 0");
    indeg[l.to]++;
  }
  if (indeg[0] != 0) throw CaseError("node 0 must be the root (no incoming line)");
  for (size_t i = 1; i < nodes.size(); ++i)
    if (indeg[i] != 1) throw CaseError("node " + std::to_string(i) + " must have exactly one parent");
  // reachability from the root
  std::vector<char> seen(nodes.size(), 0);
  std::queue<int> bfs;
  bfs.push(0);
  seen[0] = 1;
  const auto kids = children_lines();
  int count = 0;
  while (!bfs.empty()) {
    const int j = bfs.front();
    bfs.pop();
    ++count;
    for (int l : kids[j])
      if (!seen[lines[l].to]) {
        seen[lines[l].to] = 1;
        bfs.push(lines[l].to);
      }
  }
  if (count != num_nodes()) throw CaseError("network is not connected from the root");

  auto check_len = [&](const std::vector<double>& v, const char* what) {
    if (static_cast<int>(v.size()) != periods)
      throw CaseError(std::string(what) + " must have `periods` entries");
  };
  check_len(prices.rho_da, "prices.rho_da");
  check_len(prices.rho_up, "prices.rho_up");
  check_len(prices.rho_dn, "prices.rho_dn");
  check_len(prices.c_ref, "prices.c_ref");
  for (double c : prices.c_ref)
    if (c <= 0) throw CaseError("reference prices must be positive");
  if (prices.tou_min > prices.tou_max) throw CaseError("tou bounds unordered");
  for (int t = 0; t < periods; ++t)
    if (!(prices.rho_up[t] >= prices.rho_da[t] && prices.rho_da[t] >= prices.rho_dn[t]))
      warnings.push_back("no-arbitrage ordering rho+ >= rho >= rho- violated at t=" +
                         std::to_string(t));
  return warnings;
}

NetworkCase NetworkCase::from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CaseError(origin + ": " + e.what());
  }
  NetworkCase net;
  try {
    net.periods = j.at("periods").get<int>();
    if (j.contains("base")) net.s_base_kva = j["base"].value("s_base_kva", 1000.0);
    net.root_bounded = j.value("root_bounded", false);
    const double sb = net.s_base_kva;
    for (const json& jn : j.at("nodes")) {
      NodeData n;
      n.id = jn.at("id").get<int>();
      n.kappa = jn.value("kappa", 0.0);
      n.load = jn.at("load").get<std::vector<double>>();
      for (double& L : n.load) L /= sb;
      n.p_min = jn.value("p_min", 0.0) / sb;
      n.p_max = jn.value("p_max", 0.0) / sb;
      n.q_min = jn.value("q_min", 0.0) / sb;
      n.q_max = jn.value("q_max", 0.0) / sb;
      n.v_min = jn.value("v_min", 0.9);
      n.v_max = jn.value("v_max", 1.1);
      n.gen_cost = jn.value("gen_cost", 0.0);
      net.nodes.push_back(std::move(n));
    }
    for (const json& jl : j.at("lines")) {
      LineData l;
      l.from = jl.at("from").get<int>();
      l.to = jl.at("to").get<int>();
      l.r = jl.at("r").get<double>();
      l.x = jl.at("x").get<double>();
      l.s_max = jl.at("s_max").get<double>() / sb;
      net.lines.push_back(l);
    }
    const json& jp = j.at("prices");
    net.prices.rho_da = jp.at("rho_da").get<std::vector<double>>();
    net.prices.rho_up = jp.at("rho_up").get<std::vector<double>>();
    net.prices.rho_dn = jp.at("rho_dn").get<std::vector<double>>();
    net.prices.c_ref = jp.at("c_ref").get<std::vector<double>>();
    net.prices.tou_min = jp.at("tou_min").get<double>();
    net.prices.tou_max = jp.at("tou_max").get<double>();
  } catch (const json::exception& e) {
    throw CaseError(origin + ": " + e.what());
  }
  net.validate();
  return net;
}

NetworkCase NetworkCase::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path);
}

std::string NetworkCase::to_json_text() const {
  const double sb = s_base_kva;
  json j;
  j["periods"] = periods;
  j["base"] = {{"s_base_kva", s_base_kva}};
  if (root_bounded) j["root_bounded"] = true;
  j["nodes"] = json::array();
  for (const NodeData& n : nodes) {
    json jn;
    jn["id"] = n.id;
    jn["kappa"] = n.kappa;
    std::vector<double> load = n.load;
    for (double& L : load) L *= sb;
    jn["load"] = load;
    jn["p_min"] = n.p_min * sb;
    jn["p_max"] = n.p_max * sb;
    jn["q_min"] = n.q_min * sb;
    jn["q_max"] = n.q_max * sb;
    jn["v_min"] = n.v_min;
    jn["v_max"] = n.v_max;
    jn["gen_cost"] = n.gen_cost;
    j["nodes"].push_back(std::move(jn));
  }
  j["lines"] = json::array();
  for (const LineData& l : lines)
    j["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x},
                          {"s_max", l.s_max * sb}});
  j["prices"] = {{"rho_da", prices.rho_da}, {"rho_up", prices.rho_up},
                 {"rho_dn", prices.rho_dn}, {"c_ref", prices.c_ref},
                 {"tou_min", prices.tou_min}, {"tou_max", prices.tou_max}};
  return j.dump(2) + "\n";
}

void NetworkCase::to_json_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file " + path);
  out << to_json_text();
}

// --- polygon -------------------------------------------------------------------

std::vector<Halfplane> polygon_halfplanes(int sides, double s_max) {
  if (sides < 3) throw CaseError("polygon needs at least 3 sides");
  if (s_max <= 0) throw CaseError("polygon radius must be positive");
  std::vector<Halfplane> hp;
  hp.reserve(sides);
  const double rhs = std::cos(kPi / sides) * s_max;
  for (int s = 1; s <= sides; ++s) {
    const double ang = (2.0 * s - 1.0) * kPi / sides;
    hp.push_back({std::cos(ang), std::sin(ang), rhs});
  }
  return hp;
}

// --- first stage -----------------------------------------------------------------

FirstStageVars build_first_stage(Model& model, const NetworkCase& net, int polygon_sides) {
  net.validate();
  const int I = net.num_nodes(), T = net.periods, L = net.num_lines();
  const auto gens = net.generator_nodes();
  const auto kids = net.children_lines();
  FirstStageVars x;

  for (int t = 0; t < T; ++t)
    x.c.push_back(model.add_continuous(net.prices.tou_min, net.prices.tou_max));
  for (int t = 0; t < T; ++t) {
    const NodeData& root = net.nodes[0];
    if (net.root_bounded)
      x.p0.push_back(model.add_continuous(root.p_min, root.p_max));
    else
      x.p0.push_back(model.add_continuous(-kInf, kInf));
  }
  x.pg.resize(gens.size());
  x.qg.resize(gens.size());
  for (size_t g = 0; g < gens.size(); ++g) {
    const NodeData& n = net.nodes[gens[g]];
    for (int t = 0; t < T; ++t) {
      x.pg[g].push_back(model.add_continuous(n.p_min, n.p_max));
      x.qg[g].push_back(model.add_continuous(n.q_min, n.q_max));
    }
  }
  x.pf.resize(L);
  x.qf.resize(L);
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t) {
      x.pf[l].push_back(model.add_continuous(-kInf, kInf));
      x.qf[l].push_back(model.add_continuous(-kInf, kInf));
    }
  x.v.resize(I);
  for (int i = 0; i < I; ++i) {
    const NodeData& n = net.nodes[i];
    for (int t = 0; t < T; ++t)
      x.v[i].push_back(model.add_continuous(n.v_min * n.v_min, n.v_max * n.v_max));
  }

  std::vector<int> gen_slot(I, -1);
  for (size_t g = 0; g < gens.size(); ++g) gen_slot[gens[g]] = static_cast<int>(g);

  for (int t = 0; t < T; ++t) {
    // root injection: p0 = net flow out of node 0 plus the root's own load
    LinExpr root = LinExpr(x.p0[t]);
    for (int l : kids[0]) root -= LinExpr(x.pf[l][t]);
    x.rows.push_back(model.add_constraint(Sense::eq, std::move(root), net.nodes[0].load[t],
                                          "eq_root_da:t=" + std::to_string(t)));
    for (int l = 0; l < L; ++l) {
      const LineData& ln = net.lines[l];
      const int j = ln.to;
      const std::string suffix = ":t=" + std::to_string(t) + ",line=" + line_tag(net, l);
      LinExpr bp = LinExpr(x.pf[l][t]);
      LinExpr bq = LinExpr(x.qf[l][t]);
      if (gen_slot[j] >= 0) {
        bp += LinExpr(x.pg[gen_slot[j]][t]);
        bq += LinExpr(x.qg[gen_slot[j]][t]);
      }
      for (int cl : kids[j]) {
        bp -= LinExpr(x.pf[cl][t]);
        bq -= LinExpr(x.qf[cl][t]);
      }
      x.rows.push_back(model.add_constraint(Sense::eq, std::move(bp), net.nodes[j].load[t],
                                            "eq1a" + suffix));
      x.rows.push_back(model.add_constraint(Sense::eq, std::move(bq),
                                            net.nodes[j].kappa * net.nodes[j].load[t],
                                            "eq1b" + suffix));
      LinExpr vd = LinExpr(x.v[j][t]) - LinExpr(x.v[ln.from][t]) +
                   LinExpr(x.pf[l][t]) * (2.0 * ln.r) + LinExpr(x.qf[l][t]) * (2.0 * ln.x);
      x.rows.push_back(model.add_constraint(Sense::eq, std::move(vd), 0.0, "eq1c" + suffix));
      const auto hps = polygon_halfplanes(polygon_sides, ln.s_max);
      for (size_t s = 0; s < hps.size(); ++s) {
        LinExpr flow = LinExpr(x.pf[l][t]) * hps[s].cos_coef + LinExpr(x.qf[l][t]) * hps[s].sin_coef;
        x.rows.push_back(model.add_constraint(Sense::le, std::move(flow), hps[s].rhs,
                                              "eq1e" + suffix + ",s=" + std::to_string(s + 1)));
      }
    }
  }
  return x;
}

LinExpr first_stage_cost(const NetworkCase& net, const FirstStageVars& x) {
  LinExpr cost;
  for (int t = 0; t < net.periods; ++t)
    cost += LinExpr(x.p0[t]) * (net.prices.rho_da[t] * net.s_base_kva);
  return cost;
}

FirstStageSolution extract_first_stage(const NetworkCase& net, const FirstStageVars& vars,
                                       const SolveResult& res) {
  const int I = net.num_nodes(), T = net.periods, L = net.num_lines();
  const auto gens = net.generator_nodes();
  FirstStageSolution x;
  x.p_da = Mat(I, T);
  x.q_da = Mat(I, T);
  x.pf_da = Mat(L, T);
  x.qf_da = Mat(L, T);
  x.v_da = Mat(I, T);
  for (int t = 0; t < T; ++t) {
    x.c_tou.push_back(res.value(vars.c[t]));
    x.p0_da.push_back(res.value(vars.p0[t]));
  }
  for (size_t g = 0; g < gens.size(); ++g)
    for (int t = 0; t < T; ++t) {
      x.p_da.at(gens[g], t) = res.value(vars.pg[g][t]);
      x.q_da.at(gens[g], t) = res.value(vars.qg[g][t]);
    }
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t) {
      x.pf_da.at(l, t) = res.value(vars.pf[l][t]);
      x.qf_da.at(l, t) = res.value(vars.qf[l][t]);
    }
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) x.v_da.at(i, t) = res.value(vars.v[i][t]);
  return x;
}

// --- second stage -----------------------------------------------------------------

SecondStageStructure enumerate_second_stage(const NetworkCase& net, int polygon_sides) {
  net.validate();
  SecondStageStructure ss;
  SecondStageLayout& ly = ss.layout;
  ly.I = net.num_nodes();
  ly.T = net.periods;
  ly.L = net.num_lines();
  ly.gen_nodes = net.generator_nodes();
  ly.G = static_cast<int>(ly.gen_nodes.size());
  ly.gen_slot.assign(ly.I, -1);
  for (int g = 0; g < ly.G; ++g) ly.gen_slot[ly.gen_nodes[g]] = g;
  const auto kids = net.children_lines();

  auto add = [&ss](SsRow row) {
    if (row.sense == Sense::eq) ss.num_eq++;
    else ss.num_ineq++;
    ss.rows.push_back(std::move(row));
  };

  for (int t = 0; t < ly.T; ++t) {
    const std::string ts = ":t=" + std::to_string(t);
    // demand definition (3a): l_it - L_it*(c_t/cref_t - 1)*xi_it = L_it
    for (int i = 0; i < ly.I; ++i) {
      SsRow r;
      r.sense = Sense::eq;
      r.kind = SsRowKind::demand;
      r.y = {{ly.l(i, t), 1.0}};
      r.rhs = net.nodes[i].load[t];
      r.xi_i = i;
      r.xi_t = t;
      r.load = net.nodes[i].load[t];
      r.tag = "eq3a:i=" + std::to_string(i) + ",t=" + std::to_string(t);
      add(std::move(r));
    }
    // (3b): p0_rt - d+ + d- = p0_da
    {
      SsRow r;
      r.sense = Sense::eq;
      r.kind = SsRowKind::link_p0;
      r.y = {{ly.p0rt(t), 1.0}, {ly.dup(t), -1.0}, {ly.ddn(t), 1.0}};
      r.p0da_t = t;
      r.tag = "eq3b" + ts;
      add(std::move(r));
    }
    // root real-time balance: p0_rt - l_0t - sum(pf out of root) = 0
    {
      SsRow r;
      r.sense = Sense::eq;
      r.kind = SsRowKind::root_balance;
      r.y = {{ly.p0rt(t), 1.0}, {ly.l(0, t), -1.0}};
      for (int l : kids[0]) r.y.emplace_back(ly.pf(l, t), -1.0);
      r.tag = "eq_root_rt" + ts;
      add(std::move(r));
    }
    // (3c): adjustments nonnegative
    {
      SsRow r;
      r.sense = Sense::ge;
      r.kind = SsRowKind::adj_up;
      r.y = {{ly.dup(t), 1.0}};
      r.tag = "eq3c:up" + ts;
      add(std::move(r));
      SsRow r2;
      r2.sense = Sense::ge;
      r2.kind = SsRowKind::adj_dn;
      r2.y = {{ly.ddn(t), 1.0}};
      r2.tag = "eq3c:dn" + ts;
      add(std::move(r2));
    }
    // per-line rows
    for (int l = 0; l < ly.L; ++l) {
      const LineData& ln = net.lines[l];
      const int j = ln.to;
      const std::string suffix = ts + ",line=" + line_tag(net, l);
      {
        SsRow r;
        r.sense = Sense::eq;
        r.kind = SsRowKind::balance_p;
        r.y = {{ly.pf(l, t), 1.0}, {ly.l(j, t), -1.0}};
        if (ly.gen_slot[j] >= 0) r.y.emplace_back(ly.pg(ly.gen_slot[j], t), 1.0);
        for (int cl : kids[j]) r.y.emplace_back(ly.pf(cl, t), -1.0);
        r.tag = "eq3d" + suffix;
        add(std::move(r));
      }
      {
        SsRow r;
        r.sense = Sense::eq;
        r.kind = SsRowKind::balance_q;
        r.y = {{ly.qf(l, t), 1.0}, {ly.l(j, t), -net.nodes[j].kappa}};
        if (ly.gen_slot[j] >= 0) r.y.emplace_back(ly.qg(ly.gen_slot[j], t), 1.0);
        for (int cl : kids[j]) r.y.emplace_back(ly.qf(cl, t), -1.0);
        r.tag = "eq3e" + suffix;
        add(std::move(r));
      }
      {
        SsRow r;
        r.sense = Sense::eq;
        r.kind = SsRowKind::vdrop;
        r.y = {{ly.v(j, t), 1.0}, {ly.v(ln.from, t), -1.0},
               {ly.pf(l, t), 2.0 * ln.r}, {ly.qf(l, t), 2.0 * ln.x}};
        r.tag = "eq3f" + suffix;
        add(std::move(r));
      }
      const auto hps = polygon_halfplanes(polygon_sides, ln.s_max);
      for (size_t s = 0; s < hps.size(); ++s) {
        SsRow r;
        r.sense = Sense::ge;
        r.kind = SsRowKind::polygon;
        r.y = {{ly.pf(l, t), -hps[s].cos_coef}, {ly.qf(l, t), -hps[s].sin_coef}};
        r.rhs = -hps[s].rhs;
        r.tag = "eq3h" + suffix + ",s=" + std::to_string(s + 1);
        add(std::move(r));
      }
    }
    // (3g) generator limits
    for (int g = 0; g < ly.G; ++g) {
      const NodeData& n = net.nodes[ly.gen_nodes[g]];
      const std::string gs = ":i=" + std::to_string(n.id) + ",t=" + std::to_string(t);
      add({Sense::ge, {{ly.pg(g, t), 1.0}}, n.p_min, -1, -1, 0, -1, SsRowKind::gen_p_lo,
           "eq3g:p_lo" + gs});
      add({Sense::ge, {{ly.pg(g, t), -1.0}}, -n.p_max, -1, -1, 0, -1, SsRowKind::gen_p_hi,
           "eq3g:p_hi" + gs});
      add({Sense::ge, {{ly.qg(g, t), 1.0}}, n.q_min, -1, -1, 0, -1, SsRowKind::gen_q_lo,
           "eq3g:q_lo" + gs});
      add({Sense::ge, {{ly.qg(g, t), -1.0}}, -n.q_max, -1, -1, 0, -1, SsRowKind::gen_q_hi,
           "eq3g:q_hi" + gs});
    }
    if (net.root_bounded) {
      const NodeData& n = net.nodes[0];
      add({Sense::ge, {{ly.p0rt(t), 1.0}}, n.p_min, -1, -1, 0, -1, SsRowKind::root_p_lo,
           "eq3g:root_lo" + ts});
      add({Sense::ge, {{ly.p0rt(t), -1.0}}, -n.p_max, -1, -1, 0, -1, SsRowKind::root_p_hi,
           "eq3g:root_hi" + ts});
    }
    // (3i) voltage bounds
    for (int i = 0; i < ly.I; ++i) {
      const NodeData& n = net.nodes[i];
      const std::string is = ":i=" + std::to_string(i) + ",t=" + std::to_string(t);
      add({Sense::ge, {{ly.v(i, t), 1.0}}, n.v_min * n.v_min, -1, -1, 0, -1, SsRowKind::v_lo,
           "eq3i:lo" + is});
      add({Sense::ge, {{ly.v(i, t), -1.0}}, -n.v_max * n.v_max, -1, -1, 0, -1, SsRowKind::v_hi,
           "eq3i:hi" + is});
    }
  }
  return ss;
}

std::vector<double> second_stage_objective(const NetworkCase& net,
                                           const SecondStageLayout& ly,
                                           const std::vector<double>& c_tou) {
  std::vector<double> e(ly.n_y(), 0.0);
  const double sb = net.s_base_kva;
  for (int t = 0; t < ly.T; ++t) {
    for (int i = 0; i < ly.I; ++i) e[ly.l(i, t)] = -c_tou[t] * sb;
    e[ly.dup(t)] = net.prices.rho_up[t] * sb;
    e[ly.ddn(t)] = -net.prices.rho_dn[t] * sb;
    for (int g = 0; g < ly.G; ++g)
      e[ly.pg(g, t)] = net.nodes[ly.gen_nodes[g]].gen_cost * sb;
  }
  return e;
}

double ss_row_rhs(const SsRow& row, const NetworkCase& net, const std::vector<double>& c_tou,
                  const std::vector<double>& p0_da, const Mat& xi) {
  double rhs = row.rhs;
  if (row.xi_i >= 0)
    rhs += row.load * (c_tou[row.xi_t] / net.prices.c_ref[row.xi_t] - 1.0) *
           xi.at(row.xi_i, row.xi_t);
  if (row.p0da_t >= 0) rhs += p0_da[row.p0da_t];
  return rhs;
}

SecondStageBuild build_second_stage_fixed(Model& model, const NetworkCase& net,
                                          const SecondStageStructure& ss,
                                          const FirstStageSolution& x, const Mat& xi) {
  SecondStageBuild out;
  out.y.reserve(ss.layout.n_y());
  for (int i = 0; i < ss.layout.n_y(); ++i) out.y.push_back(model.add_continuous(-kInf, kInf));
  for (const SsRow& row : ss.rows) {
    LinExpr e;
    for (const auto& [yi, coef] : row.y) e.add(out.y[yi], coef);
    out.rows.push_back(model.add_constraint(row.sense, std::move(e),
                                            ss_row_rhs(row, net, x.c_tou, x.p0_da, xi), row.tag));
  }
  return out;
}

SecondStageSolution extract_second_stage(const NetworkCase& net, const SecondStageLayout& ly,
                                         const std::vector<double>& y) {
  SecondStageSolution s;
  s.demand = Mat(ly.I, ly.T);
  s.p_rt = Mat(ly.I, ly.T);
  s.q_rt = Mat(ly.I, ly.T);
  s.pf_rt = Mat(ly.L, ly.T);
  s.qf_rt = Mat(ly.L, ly.T);
  s.v_rt = Mat(ly.I, ly.T);
  (void)net;
  for (int t = 0; t < ly.T; ++t) {
    for (int i = 0; i < ly.I; ++i) {
      s.demand.at(i, t) = y[ly.l(i, t)];
      s.v_rt.at(i, t) = y[ly.v(i, t)];
    }
    for (int g = 0; g < ly.G; ++g) {
      s.p_rt.at(ly.gen_nodes[g], t) = y[ly.pg(g, t)];
      s.q_rt.at(ly.gen_nodes[g], t) = y[ly.qg(g, t)];
    }
    for (int l = 0; l < ly.L; ++l) {
      s.pf_rt.at(l, t) = y[ly.pf(l, t)];
      s.qf_rt.at(l, t) = y[ly.qf(l, t)];
    }
    s.p0_rt.push_back(y[ly.p0rt(t)]);
    s.adj_up.push_back(y[ly.dup(t)]);
    s.adj_dn.push_back(y[ly.ddn(t)]);
  }
  return s;
}

// --- validation ---------------------------------------------------------------------

namespace {

struct Checker {
  ValidationReport& report;
  double tol;
  void eq(const std::string& tag, double lhs, double rhs) { residual(tag, std::abs(lhs - rhs)); }
  void le(const std::string& tag, double lhs, double rhs) {
    residual(tag, std::max(0.0, lhs - rhs));
  }
  void residual(const std::string& tag, double r) {
    report.max_residual = std::max(report.max_residual, r);
    if (r > tol) report.violations.push_back({tag, r});
  }
};

}  // namespace

ValidationReport validate_first_stage(const NetworkCase& net, const FirstStageSolution& x,
                                      double tol) {
  ValidationReport report;
  Checker ck{report, tol};
  const auto kids = net.children_lines();
  const int T = net.periods, L = net.num_lines();
  for (int t = 0; t < T; ++t) {
    const std::string ts = ":t=" + std::to_string(t);
    double rootflow = net.nodes[0].load[t];
    for (int l : kids[0]) rootflow += x.pf_da.at(l, t);
    ck.eq("eq_root_da" + ts, x.p0_da[t], rootflow);
    ck.le("eq1g:lo" + ts, net.prices.tou_min, x.c_tou[t]);
    ck.le("eq1g:hi" + ts, x.c_tou[t], net.prices.tou_max);
    for (int l = 0; l < L; ++l) {
      const LineData& ln = net.lines[l];
      const int j = ln.to;
      const std::string suffix = ts + ",line=" + line_tag(net, l);
      double out_p = 0, out_q = 0;
      for (int cl : kids[j]) {
        out_p += x.pf_da.at(cl, t);
        out_q += x.qf_da.at(cl, t);
      }
      ck.eq("eq1a" + suffix, x.pf_da.at(l, t) + x.p_da.at(j, t) - net.nodes[j].load[t], out_p);
      ck.eq("eq1b" + suffix,
            x.qf_da.at(l, t) + x.q_da.at(j, t) - net.nodes[j].kappa * net.nodes[j].load[t], out_q);
      ck.eq("eq1c" + suffix, x.v_da.at(j, t),
            x.v_da.at(ln.from, t) - 2 * ln.r * x.pf_da.at(l, t) - 2 * ln.x * x.qf_da.at(l, t));
      const double p = x.pf_da.at(l, t), q = x.qf_da.at(l, t);
      ck.le("eq1e" + suffix, p * p + q * q, ln.s_max * ln.s_max);
    }
    for (int i = 0; i < net.num_nodes(); ++i) {
      const NodeData& n = net.nodes[i];
      const std::string is = ":i=" + std::to_string(i) + ts;
      ck.le("eq1f:lo" + is, n.v_min * n.v_min, x.v_da.at(i, t));
      ck.le("eq1f:hi" + is, x.v_da.at(i, t), n.v_max * n.v_max);
      if (i != 0 && n.has_generator()) {
        ck.le("eq1d:p_lo" + is, n.p_min, x.p_da.at(i, t));
        ck.le("eq1d:p_hi" + is, x.p_da.at(i, t), n.p_max);
        ck.le("eq1d:q_lo" + is, n.q_min, x.q_da.at(i, t));
        ck.le("eq1d:q_hi" + is, x.q_da.at(i, t), n.q_max);
      }
    }
  }
  return report;
}

ValidationReport validate_solution(const NetworkCase& net, const FirstStageSolution& x,
                                   const SecondStageSolution& y, const Mat& xi, double tol) {
  ValidationReport report = validate_first_stage(net, x, tol);
  Checker ck{report, tol};
  const auto kids = net.children_lines();
  const int T = net.periods, L = net.num_lines();
  for (int t = 0; t < T; ++t) {
    const std::string ts = ":t=" + std::to_string(t);
    for (int i = 0; i < net.num_nodes(); ++i) {
      const std::string is = ":i=" + std::to_string(i) + ",t=" + std::to_string(t);
      ck.eq("eq3a" + is, y.demand.at(i, t),
            realized_demand(net.nodes[i].load[t], xi.at(i, t), x.c_tou[t],
                            net.prices.c_ref[t]));
      const NodeData& n = net.nodes[i];
      ck.le("eq3i:lo" + is, n.v_min * n.v_min, y.v_rt.at(i, t));
      ck.le("eq3i:hi" + is, y.v_rt.at(i, t), n.v_max * n.v_max);
      if (i != 0 && n.has_generator()) {
        ck.le("eq3g:p_lo" + is, n.p_min, y.p_rt.at(i, t));
        ck.le("eq3g:p_hi" + is, y.p_rt.at(i, t), n.p_max);
        ck.le("eq3g:q_lo" + is, n.q_min, y.q_rt.at(i, t));
        ck.le("eq3g:q_hi" + is, y.q_rt.at(i, t), n.q_max);
      }
    }
    ck.eq("eq3b" + ts, x.p0_da[t] + y.adj_up[t] - y.adj_dn[t], y.p0_rt[t]);
    ck.le("eq3c:up" + ts, 0.0, y.adj_up[t]);
    ck.le("eq3c:dn" + ts, 0.0, y.adj_dn[t]);
    double rootflow = y.demand.at(0, t);
    for (int l : kids[0]) rootflow += y.pf_rt.at(l, t);
    ck.eq("eq_root_rt" + ts, y.p0_rt[t], rootflow);
    for (int l = 0; l < L; ++l) {
      const LineData& ln = net.lines[l];
      const int j = ln.to;
      const std::string suffix = ts + ",line=" + line_tag(net, l);
      double out_p = 0, out_q = 0;
      for (int cl : kids[j]) {
        out_p += y.pf_rt.at(cl, t);
        out_q += y.qf_rt.at(cl, t);
      }
      ck.eq("eq3d" + suffix, y.pf_rt.at(l, t) + y.p_rt.at(j, t) - y.demand.at(j, t), out_p);
      ck.eq("eq3e" + suffix,
            y.qf_rt.at(l, t) + y.q_rt.at(j, t) - net.nodes[j].kappa * y.demand.at(j, t), out_q);
      ck.eq("eq3f" + suffix, y.v_rt.at(j, t),
            y.v_rt.at(ln.from, t) - 2 * ln.r * y.pf_rt.at(l, t) - 2 * ln.x * y.qf_rt.at(l, t));
      const double p = y.pf_rt.at(l, t), q = y.qf_rt.at(l, t);
      ck.le("eq3h" + suffix, p * p + q * q, ln.s_max * ln.s_max);
    }
  }
  return report;
}

}  // namespace vppro
