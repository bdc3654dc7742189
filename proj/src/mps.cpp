#include "vppro/mps.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace vppro {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_free_mps(const CompiledModel& m, std::ostream& os, const std::string& name) {
  const size_t nrows = m.row_lo.size();
  os << "NAME " << name << "\n";
  os << "ROWS\n";
  os << " N OBJ\n";
  // row type and whether a RANGES entry is needed
  std::vector<char> rtype(nrows);
  for (size_t r = 0; r < nrows; ++r) {
    const double lo = m.row_lo[r], hi = m.row_hi[r];
    char t;
    if (lo == hi) t = 'E';
    else if (std::isfinite(lo) && std::isfinite(hi)) t = 'G';  // + RANGES
    else if (std::isfinite(hi)) t = 'L';
    else t = 'G';
    rtype[r] = t;
    os << " " << t << " c" << r << "\n";
  }

  // column-major scan of the CSR matrix
  std::vector<std::vector<std::pair<size_t, double>>> bycol(m.nv);
  for (size_t r = 0; r < nrows; ++r)
    for (auto k = m.a_start[r]; k < m.a_start[r + 1]; ++k)
      bycol[m.a_col[k]].emplace_back(r, m.a_val[k]);

  os << "COLUMNS\n";
  std::vector<bool> is_int(m.nv, false);
  for (int i : m.integer_vars) is_int[i] = true;
  bool in_int = false;
  for (int j = 0; j < m.nv; ++j) {
    if (is_int[j] != in_int) {
      os << " MARKER 'MARKER' '" << (is_int[j] ? "INTORG" : "INTEND") << "'\n";
      in_int = is_int[j];
    }
    if (m.obj[j] != 0.0) os << " x" << j << " OBJ " << num(m.obj[j]) << "\n";
    for (const auto& [r, v] : bycol[j]) os << " x" << j << " c" << r << " " << num(v) << "\n";
    if (m.obj[j] == 0.0 && bycol[j].empty())
      os << " x" << j << " OBJ 0\n";  // keep the column present
  }
  if (in_int) os << " MARKER 'MARKER' 'INTEND'\n";

  os << "RHS\n";
  if (m.obj_constant != 0.0) os << " RHS OBJ " << num(-m.obj_constant) << "\n";
  for (size_t r = 0; r < nrows; ++r) {
    const double b = rtype[r] == 'L' ? m.row_hi[r] : m.row_lo[r];
    if (b != 0.0) os << " RHS c" << r << " " << num(b) << "\n";
  }
  bool any_range = false;
  for (size_t r = 0; r < nrows; ++r)
    if (rtype[r] == 'G' && std::isfinite(m.row_hi[r]) && m.row_hi[r] != m.row_lo[r])
      any_range = true;
  if (any_range) {
    os << "RANGES\n";
    for (size_t r = 0; r < nrows; ++r)
      if (rtype[r] == 'G' && std::isfinite(m.row_hi[r]) && m.row_hi[r] != m.row_lo[r])
        os << " RNG c" << r << " " << num(m.row_hi[r] - m.row_lo[r]) << "\n";
  }

  os << "BOUNDS\n";
  for (int j = 0; j < m.nv; ++j) {
    const double lo = m.lb[j], hi = m.ub[j];
    if (is_int[j] && lo == 0.0 && hi == 1.0) {
      os << " BV BND x" << j << "\n";
    } else if (lo == hi) {
      os << " FX BND x" << j << " " << num(lo) << "\n";
    } else if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << " FR BND x" << j << "\n";
    } else {
      if (!std::isfinite(lo)) os << " MI BND x" << j << "\n";
      else if (lo != 0.0) os << " LO BND x" << j << " " << num(lo) << "\n";
      if (std::isfinite(hi)) os << " UP BND x" << j << " " << num(hi) << "\n";
    }
  }
  os << "ENDATA\n";
}

BackendResult parse_solution_file(const std::string& path, const CompiledModel& model) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open solution file " + path);
  BackendResult r;
  r.primal.assign(model.nv, 0.0);
  r.dual.assign(model.row_lo.size(), 0.0);
  bool saw_status = false, saw_cols = false, saw_duals = false;
  enum { none, cols, rows } section = none;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a;
    ss >> a;
    if (a == "=status=") {
      std::string s;
      ss >> s;
      saw_status = true;
      if (s == "optimal") r.status = SolveStatus::optimal;
      else if (s == "infeasible") r.status = SolveStatus::infeasible;
      else if (s == "unbounded") r.status = SolveStatus::unbounded;
      else if (s == "limit") r.status = SolveStatus::limit;
      else throw BackendError("external solver reported: " + s);
    } else if (a == "=objective=") {
      ss >> r.objective;
    } else if (a == "=gap=") {
      ss >> r.gap;
    } else if (a == "=columns=") {
      section = cols;
      saw_cols = true;
    } else if (a == "=rows=") {
      section = rows;
      saw_duals = true;
    } else if (section == cols && a.size() > 1 && a[0] == 'x') {
      double v;
      ss >> v;
      const int idx = std::atoi(a.c_str() + 1);
      if (idx >= 0 && idx < model.nv) r.primal[idx] = v;
    } else if (section == rows && a.size() > 1 && a[0] == 'c') {
      double v;
      ss >> v;
      const size_t idx = static_cast<size_t>(std::atoi(a.c_str() + 1));
      if (idx < r.dual.size()) r.dual[idx] = v;
    }
  }
  if (!saw_status) throw BackendError("solution file " + path + " has no =status= line");
  r.solved = saw_cols && (r.status == SolveStatus::optimal || r.status == SolveStatus::limit);
  if (!r.solved) r.primal.clear();
  if (!saw_duals || !model.integer_vars.empty()) r.dual.clear();
  return r;
}

BackendResult MpsFileBackend::solve(const CompiledModel& model, const SolverOptions& options) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path dir = fs::temp_directory_path();
  const std::string stem = "vppro_" + std::to_string(::getpid()) + "_" +
                           std::to_string(counter.fetch_add(1));
  const fs::path mps = dir / (stem + ".mps");
  const fs::path sol = dir / (stem + ".sol");
  {
    std::ofstream os(mps);
    write_free_mps(model, os);
  }

  std::string cmd;
  if (const char* tmpl = std::getenv("VPP_SOLVER_MPS_CMD"); tmpl && *tmpl) {
    cmd = tmpl;
    auto replace = [&cmd](const std::string& key, const std::string& val) {
      for (size_t pos; (pos = cmd.find(key)) != std::string::npos;)
        cmd.replace(pos, key.size(), val);
    };
    replace("{mps}", mps.string());
    replace("{sol}", sol.string());
  } else {
    std::ostringstream ss;
    ss << python_command() << " '" << driver_path() << "' --mps '" << mps.string()
       << "' --out '" << sol.string() << "' --mip-gap " << options.mip_gap;
    if (options.time_limit > 0) ss << " --time-limit " << options.time_limit;
    if (options.want_duals) ss << " --want-duals";
    cmd = ss.str();
  }
  const int rc = std::system(cmd.c_str());
  if (!fs::exists(sol))
    throw BackendError("external MPS solver produced no solution file (rc=" +
                       std::to_string(rc) + "): " + cmd);
  BackendResult r = parse_solution_file(sol.string(), model);
  fs::remove(mps);
  fs::remove(sol);
  return r;
}

}  // namespace vppro
