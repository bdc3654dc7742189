#include "vppro/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace vppro {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  }
  return out;
}

}  // namespace

ElasticityTable::ElasticityTable(int nodes, int periods, int intervals)
    : I_(nodes), T_(periods), K_(intervals),
      intervals_(static_cast<size_t>(periods) * intervals),
      xi_(static_cast<size_t>(nodes) * periods * intervals) {
  if (nodes < 1 || periods < 1 || intervals < 1)
    throw TableError("elasticity table dimensions must be positive");
}

void ElasticityTable::validate() const {
  if (K_ == 0) throw TableError("empty elasticity table");
  for (int t = 0; t < T_; ++t) {
    for (int k = 0; k < K_; ++k) {
      const RatioInterval& iv = interval(t, k);
      if (!(iv.r_lo < iv.r_hi))
        throw TableError("interval (t=" + std::to_string(t) + ",k=" + std::to_string(k) +
                         ") must have r_lo < r_hi");
      if (k > 0 && std::abs(interval(t, k - 1).r_hi - iv.r_lo) > 1e-9)
        throw TableError("intervals must be contiguous at t=" + std::to_string(t) +
                         ", k=" + std::to_string(k));
    }
    for (int i = 0; i < I_; ++i)
      for (int k = 0; k < K_; ++k)
        if (xi(i, t, k).lo > xi(i, t, k).hi)
          throw TableError("xi bounds unordered at i=" + std::to_string(i) +
                           ",t=" + std::to_string(t) + ",k=" + std::to_string(k));
  }
}

ElasticityTable ElasticityTable::from_csv(const std::string& path, int nodes, int periods,
                                          const std::optional<std::string>& class_map_path) {
  std::ifstream in(path);
  if (!in) throw TableError("cannot open elasticity file " + path);
  std::string header;
  if (!std::getline(in, header)) throw TableError(path + ": empty file");
  const auto cols = split_csv_line(header);
  const std::vector<std::string> want_node = {"node", "t", "k", "r_lo", "r_hi", "xi_lo", "xi_hi"};
  const std::vector<std::string> want_class = {"class", "t", "k", "r_lo", "r_hi", "xi_lo", "xi_hi"};
  bool by_class;
  if (cols == want_node) {
    by_class = false;
  } else if (cols == want_class) {
    by_class = true;
  } else {
    // name the first missing/mismatched column for the diagnostic
    const auto& want = (!cols.empty() && cols[0] == "class") ? want_class : want_node;
    for (size_t c = 0; c < want.size(); ++c)
      if (c >= cols.size() || cols[c] != want[c])
        throw TableError(path + ": header column " + std::to_string(c + 1) + " must be '" +
                         want[c] + "'" + (c < cols.size() ? " (got '" + cols[c] + "')" : " (missing)"));
    throw TableError(path + ": unexpected extra header columns");
  }
  if (by_class && !class_map_path)
    throw TableError(path + ": class-based table requires a node->class map file");

  std::map<std::string, std::vector<int>> class_nodes;
  if (by_class) {
    std::ifstream mp(*class_map_path);
    if (!mp) throw TableError("cannot open class map " + *class_map_path);
    std::string line;
    std::getline(mp, line);
    if (split_csv_line(line) != std::vector<std::string>{"node", "class"})
      throw TableError(*class_map_path + ": header must be 'node,class'");
    int ln = 1;
    while (std::getline(mp, line)) {
      ++ln;
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 2)
        throw TableError(*class_map_path + ":" + std::to_string(ln) + ": expected 2 fields");
      class_nodes[f[1]].push_back(std::stoi(f[0]));
    }
  }

  ElasticityTable table;
  struct Entry {
    double r_lo, r_hi, xi_lo, xi_hi;
  };
  std::vector<std::tuple<std::vector<int>, int, int, Entry>> rows;  // nodes, t, k
  int max_k = -1;
  std::string line;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw TableError(path + ":" + std::to_string(ln) + ": expected 7 fields, got " +
                       std::to_string(f.size()));
    std::vector<int> target_nodes;
    try {
      if (by_class) {
        const auto it = class_nodes.find(f[0]);
        if (it == class_nodes.end())
          throw TableError(path + ":" + std::to_string(ln) + ": unknown class '" + f[0] + "'");
        target_nodes = it->second;
      } else {
        target_nodes = {std::stoi(f[0])};
      }
      const int t = std::stoi(f[1]);
      const int k = std::stoi(f[2]);
      if (t < 0 || t >= periods)
        throw TableError(path + ":" + std::to_string(ln) + ": t out of range");
      if (k < 0) throw TableError(path + ":" + std::to_string(ln) + ": k must be >= 0");
      max_k = std::max(max_k, k);
      rows.emplace_back(target_nodes, t, k,
                        Entry{std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
    } catch (const std::invalid_argument&) {
      throw TableError(path + ":" + std::to_string(ln) + ": numeric field expected");
    }
  }
  if (max_k < 0) throw TableError(path + ": no data rows");

  table = ElasticityTable(nodes, periods, max_k + 1);
  std::vector<char> interval_seen(static_cast<size_t>(periods) * (max_k + 1), 0);
  for (const auto& [target_nodes, t, k, e] : rows) {
    const size_t ik = static_cast<size_t>(t) * (max_k + 1) + k;
    if (interval_seen[ik]) {
      const RatioInterval& iv = table.interval(t, k);
      if (std::abs(iv.r_lo - e.r_lo) > 1e-12 || std::abs(iv.r_hi - e.r_hi) > 1e-12)
        throw TableError(path + ": inconsistent ratio bounds for t=" + std::to_string(t) +
                         ",k=" + std::to_string(k));
    } else {
      table.interval(t, k) = {e.r_lo, e.r_hi};
      interval_seen[ik] = 1;
    }
    for (int i : target_nodes) {
      if (i < 0 || i >= nodes)
        throw TableError(path + ": node " + std::to_string(i) + " outside the case");
      table.xi(i, t, k) = {e.xi_lo, e.xi_hi};
    }
  }
  for (int t = 0; t < periods; ++t)
    for (int k = 0; k <= max_k; ++k)
      if (!interval_seen[static_cast<size_t>(t) * (max_k + 1) + k])
        throw TableError(path + ": interval (t=" + std::to_string(t) + ",k=" +
                         std::to_string(k) + ") never defined");
  table.validate();
  return table;
}

void ElasticityTable::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw TableError("cannot write elasticity file " + path);
  out << "node,t,k,r_lo,r_hi,xi_lo,xi_hi\n";
  char buf[160];
  for (int i = 0; i < I_; ++i)
    for (int t = 0; t < T_; ++t)
      for (int k = 0; k < K_; ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.12g,%.12g,%.12g,%.12g\n", i, t, k,
                      interval(t, k).r_lo, interval(t, k).r_hi, xi(i, t, k).lo, xi(i, t, k).hi);
        out << buf;
      }
}

int interval_lookup(const ElasticityTable& table, int t, double ratio) {
  constexpr double kEps = 1e-12;
  for (int k = 0; k < table.num_intervals(); ++k) {
    const RatioInterval& iv = table.interval(t, k);
    if (ratio >= iv.r_lo - kEps && ratio <= iv.r_hi + kEps) return k;
  }
  throw OutOfCoverageError("ratio " + std::to_string(ratio) + " outside interval coverage at t=" +
                           std::to_string(t));
}

std::vector<int> interval_candidates(const ElasticityTable& table, int t, double ratio,
                                     double tie_tol) {
  const int k = interval_lookup(table, t, ratio);
  std::vector<int> out = {k};
  if (k + 1 < table.num_intervals() &&
      std::abs(ratio - table.interval(t, k).r_hi) <= tie_tol)
    out.push_back(k + 1);
  if (k > 0 && std::abs(ratio - table.interval(t, k).r_lo) <= tie_tol)
    out.insert(out.begin(), k - 1);
  return out;
}

Mat vertex_to_scenario(const ElasticityTable& table, const std::vector<int>& z, const Mat& v) {
  Mat xi(table.nodes(), table.periods());
  for (int i = 0; i < table.nodes(); ++i)
    for (int t = 0; t < table.periods(); ++t) {
      const XiBounds& b = table.xi(i, t, z.at(t));
      xi.at(i, t) = (1.0 - v.at(i, t)) * b.lo + v.at(i, t) * b.hi;
    }
  return xi;
}

Mat scenario_to_vertex(const ElasticityTable& table, const std::vector<int>& z, const Mat& xi,
                       double tol) {
  Mat v(table.nodes(), table.periods());
  for (int i = 0; i < table.nodes(); ++i)
    for (int t = 0; t < table.periods(); ++t) {
      const XiBounds& b = table.xi(i, t, z.at(t));
      const double span = b.hi - b.lo;
      if (span <= 0) {
        v.at(i, t) = 0.0;  // degenerate interval tie rule
        continue;
      }
      const double x = xi.at(i, t);
      if (x < b.lo - tol || x > b.hi + tol)
        throw TableError("xi outside selected bounds at i=" + std::to_string(i) +
                         ",t=" + std::to_string(t));
      v.at(i, t) = std::clamp((x - b.lo) / span, 0.0, 1.0);
    }
  return v;
}

std::string check_scenario(const ElasticityTable& table, const Scenario& s, double tol) {
  if (static_cast<int>(s.z.size()) != table.periods()) return "selector length mismatch";
  for (int t = 0; t < table.periods(); ++t)
    if (s.z[t] < 0 || s.z[t] >= table.num_intervals())
      return "selector out of range at t=" + std::to_string(t);
  for (int i = 0; i < table.nodes(); ++i)
    for (int t = 0; t < table.periods(); ++t) {
      const XiBounds& b = table.xi(i, t, s.z[t]);
      const double x = s.xi.at(i, t), vv = s.v.at(i, t);
      if (x < b.lo - tol || x > b.hi + tol)
        return "xi outside selected bounds at i=" + std::to_string(i) + ",t=" + std::to_string(t);
      if (vv < -tol || vv > 1 + tol)
        return "v outside [0,1] at i=" + std::to_string(i) + ",t=" + std::to_string(t);
      const double expect = (1.0 - vv) * b.lo + vv * b.hi;
      if (std::abs(expect - x) > tol * (1 + std::abs(x)))
        return "xi inconsistent with (v,z) at i=" + std::to_string(i) + ",t=" + std::to_string(t);
    }
  return {};
}

SetReformulation add_set_reformulation(Model& model, const ElasticityTable& table,
                                       const std::vector<VarRef>& c_vars,
                                       const std::vector<double>& c_fixed,
                                       const std::vector<double>& c_ref, ReformMode mode,
                                       double tie_tol) {
  if (table.num_intervals() == 0) throw TableError("empty elasticity table");
  const int I = table.nodes(), T = table.periods(), K = table.num_intervals();
  SetReformulation out;
  out.z.resize(T);

  for (int t = 0; t < T; ++t) {
    std::vector<int> cands;
    if (mode == ReformMode::adversary) {
      cands = interval_candidates(table, t, c_fixed.at(t) / c_ref.at(t), tie_tol);
    } else {
      cands.resize(K);
      for (int k = 0; k < K; ++k) cands[k] = k;
    }
    out.z[t].resize(K);
    if (cands.size() == 1) {
      for (int k = 0; k < K; ++k) out.z[t][k] = {VarRef{}, k == cands[0] ? 1.0 : 0.0, false};
    } else {
      LinExpr one_hot;
      for (int k = 0; k < K; ++k) {
        const bool cand = std::find(cands.begin(), cands.end(), k) != cands.end();
        if (cand) {
          const VarRef zv = model.add_binary();
          out.z[t][k] = {zv, 0.0, true};
          one_hot += LinExpr(zv);
        } else {
          out.z[t][k] = {VarRef{}, 0.0, false};
        }
      }
      out.rows.push_back(model.add_constraint(Sense::eq, std::move(one_hot), 1.0,
                                              "eq6c:t=" + std::to_string(t)));
      // (6b): sum_k r_lo*z <= c/cref <= sum_k r_hi*z
      LinExpr lo_row, hi_row;
      LinExpr c_term = mode == ReformMode::master ? LinExpr(c_vars.at(t)) * (1.0 / c_ref[t])
                                                  : LinExpr(c_fixed.at(t) / c_ref[t]);
      for (int k = 0; k < K; ++k)
        if (out.z[t][k].is_var) {
          lo_row += LinExpr(out.z[t][k].var) * table.interval(t, k).r_lo;
          hi_row += LinExpr(out.z[t][k].var) * table.interval(t, k).r_hi;
        }
      out.rows.push_back(model.add_constraint(Sense::le, lo_row - c_term, 0.0,
                                              "eq6b:lo,t=" + std::to_string(t)));
      out.rows.push_back(model.add_constraint(Sense::le, c_term - hi_row, 0.0,
                                              "eq6b:hi,t=" + std::to_string(t)));
    }
  }

  // (6a): xi between the selected bounds
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      double lo_const = 0, hi_const = 0;
      LinExpr lo_expr, hi_expr;
      for (int k = 0; k < K; ++k) {
        const ZEntry& z = out.z[t][k];
        const XiBounds& b = table.xi(i, t, k);
        if (z.is_var) {
          lo_expr += LinExpr(z.var) * b.lo;
          hi_expr += LinExpr(z.var) * b.hi;
        } else {
          lo_const += z.fixed * b.lo;
          hi_const += z.fixed * b.hi;
        }
      }
      const VarRef xi = model.add_continuous(-kInf, kInf);
      out.xi.push_back(xi);
      const std::string suffix = ":i=" + std::to_string(i) + ",t=" + std::to_string(t);
      out.rows.push_back(model.add_constraint(Sense::ge, LinExpr(xi) - lo_expr, lo_const,
                                              "eq6a:lo" + suffix));
      out.rows.push_back(model.add_constraint(Sense::le, LinExpr(xi) - hi_expr, hi_const,
                                              "eq6a:hi" + suffix));
    }
  return out;
}

BudgetHandles add_budget_constraints(Model& model, const std::vector<VarRef>& v, int nodes,
                                     int periods, const BudgetParams& budgets) {
  BudgetHandles out;
  for (int i = 0; i < nodes; ++i)
    for (int t = 0; t < periods; ++t) {
      const VarRef u = model.add_continuous(0.0, 1.0);
      out.u.push_back(u);
      const VarRef vv = v.at(static_cast<size_t>(i) * periods + t);
      const std::string suffix = ":i=" + std::to_string(i) + ",t=" + std::to_string(t);
      out.rows.push_back(model.add_constraint(Sense::ge, LinExpr(u) - LinExpr(vv) * 2.0, -1.0,
                                              "budget:u_ge_2v-1" + suffix));
      out.rows.push_back(model.add_constraint(Sense::ge, LinExpr(u) + LinExpr(vv) * 2.0, 1.0,
                                              "budget:u_ge_1-2v" + suffix));
    }
  for (int t = 0; t < periods; ++t) {
    LinExpr row;
    for (int i = 0; i < nodes; ++i) row += LinExpr(out.u[static_cast<size_t>(i) * periods + t]);
    out.rows.push_back(model.add_constraint(Sense::le, std::move(row), budgets.gamma_s,
                                            "budget:gamma_s:t=" + std::to_string(t)));
  }
  for (int i = 0; i < nodes; ++i) {
    LinExpr row;
    for (int t = 0; t < periods; ++t) row += LinExpr(out.u[static_cast<size_t>(i) * periods + t]);
    out.rows.push_back(model.add_constraint(Sense::le, std::move(row), budgets.gamma_t,
                                            "budget:gamma_t:i=" + std::to_string(i)));
  }
  return out;
}

}  // namespace vppro
