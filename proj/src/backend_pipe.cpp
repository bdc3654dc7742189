#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>

#include <nlohmann/json.hpp>

#include "vppro/backend.hpp"

namespace vppro {

using nlohmann::json;

namespace {

constexpr double kInfSentinel = 1e29;

double clamp_inf(double x) {
  if (x >= kInfSentinel || x == kInf) return kInfSentinel;
  if (x <= -kInfSentinel || x == -kInf) return -kInfSentinel;
  return x;
}

std::string exe_dir() {
  char buf[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return {};
  buf[n] = '\0';
  return std::filesystem::path(buf).parent_path().string();
}

// Talks JSON-lines to a `solve_model.py --serve` child over two pipes.
class PipeClient {
 public:
  PipeClient() { start(); }
  ~PipeClient() { stop(); }

  json request(const json& req) {
    std::string line = req.dump();
    line.push_back('\n');
    if (!write_all(line)) restart_and_fail("solver driver pipe closed while writing");
    std::string resp;
    if (!read_line(resp)) restart_and_fail("solver driver pipe closed while reading");
    return json::parse(resp);
  }

 private:
  void start() {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw BackendError("pipe() failed");
    const pid_t pid = ::fork();
    if (pid < 0) throw BackendError("fork() failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      const std::string py = python_command();
      const std::string driver = driver_path();
      ::execlp(py.c_str(), py.c_str(), driver.c_str(), "--serve", (char*)nullptr);
      std::perror("exec solver driver");
      ::_exit(127);
    }
    pid_ = pid;
    wfd_ = to_child[1];
    rfd_ = from_child[0];
    ::close(to_child[0]);
    ::close(from_child[1]);
    json pong = request({{"op", "ping"}});
    if (!pong.value("ok", false)) throw BackendError("solver driver did not answer ping");
  }

  void stop() {
    if (pid_ <= 0) return;
    ::close(wfd_);
    ::close(rfd_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  [[noreturn]] void restart_and_fail(const std::string& msg) {
    stop();
    throw BackendError(msg + " (is python3 + scipy available? driver: " + driver_path() + ")");
  }

  bool write_all(const std::string& s) {
    size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::write(wfd_, s.data() + off, s.size() - off);
      if (n <= 0) return false;
      off += static_cast<size_t>(n);
    }
    return true;
  }

  bool read_line(std::string& out) {
    out.clear();
    char buf[1 << 16];
    for (;;) {
      const size_t nl = rbuf_.find('\n');
      if (nl != std::string::npos) {
        out = rbuf_.substr(0, nl);
        rbuf_.erase(0, nl + 1);
        return true;
      }
      const ssize_t n = ::read(rfd_, buf, sizeof(buf));
      if (n <= 0) return false;
      rbuf_.append(buf, static_cast<size_t>(n));
    }
  }

  pid_t pid_ = -1;
  int wfd_ = -1, rfd_ = -1;
  std::string rbuf_;
};

PipeClient& client() {
  thread_local std::unique_ptr<PipeClient> c;
  if (!c) c = std::make_unique<PipeClient>();
  return *c;
}

json model_to_json(const CompiledModel& m) {
  json jm;
  jm["nv"] = m.nv;
  json lb = json::array(), ub = json::array(), obj = json::array();
  for (int i = 0; i < m.nv; ++i) {
    lb.push_back(clamp_inf(m.lb[i]));
    ub.push_back(clamp_inf(m.ub[i]));
    obj.push_back(m.obj[i]);
  }
  jm["lb"] = std::move(lb);
  jm["ub"] = std::move(ub);
  jm["obj"] = std::move(obj);
  jm["integer"] = m.integer_vars;
  json rlo = json::array(), rhi = json::array();
  for (size_t r = 0; r < m.row_lo.size(); ++r) {
    rlo.push_back(clamp_inf(m.row_lo[r]));
    rhi.push_back(clamp_inf(m.row_hi[r]));
  }
  jm["row_lo"] = std::move(rlo);
  jm["row_hi"] = std::move(rhi);
  jm["a_start"] = m.a_start;
  jm["a_col"] = m.a_col;
  jm["a_val"] = m.a_val;
  return jm;
}

json options_to_json(const SolverOptions& o) {
  return {{"mip_gap", o.mip_gap}, {"time_limit", o.time_limit}, {"want_duals", o.want_duals}};
}

BackendResult result_from_json(const json& resp) {
  BackendResult r;
  const std::string status = resp.value("status", "error");
  if (status == "optimal") r.status = SolveStatus::optimal;
  else if (status == "infeasible") r.status = SolveStatus::infeasible;
  else if (status == "unbounded") r.status = SolveStatus::unbounded;
  else if (status == "limit") r.status = SolveStatus::limit;
  else throw BackendError("solver driver error: " + resp.value("message", "?"));
  r.objective = resp.value("objective", 0.0);
  r.gap = resp.value("gap", 0.0);
  r.message = resp.value("message", "");
  if (resp.contains("x") && resp["x"].is_array()) {
    r.primal = resp["x"].get<std::vector<double>>();
    r.solved = true;
  }
  if (resp.contains("duals") && resp["duals"].is_array())
    r.dual = resp["duals"].get<std::vector<double>>();
  return r;
}

}  // namespace

std::string python_command() {
  const char* py = std::getenv("VPP_PYTHON");
  return py && *py ? py : "python3";
}

std::string driver_path() {
  if (const char* p = std::getenv("VPP_SOLVER_DRIVER"); p && *p) return p;
  const std::string local = exe_dir() + "/solve_model.py";
  if (std::filesystem::exists(local)) return local;
#ifdef VPPRO_TOOLS_DIR
  return std::string(VPPRO_TOOLS_DIR) + "/solve_model.py";
#else
  return "solve_model.py";
#endif
}

BackendResult PipeBackend::solve(const CompiledModel& model, const SolverOptions& options) {
  json req = {{"op", "solve"}, {"model", model_to_json(model)}, {"options", options_to_json(options)}};
  BackendResult r = result_from_json(client().request(req));
  r.objective += model.obj_constant;  // driver reports without the constant
  return r;
}

SolverBackend& default_backend() {
  static PipeBackend pipe;
  static MpsFileBackend mps;
  const char* sel = std::getenv("VPP_SOLVER_BACKEND");
  if (sel && std::string(sel) == "mps") return mps;
  return pipe;
}

std::vector<BackendResult> solve_batch(const std::vector<CompiledModel>& models,
                                       const SolverOptions& options) {
  SolverBackend& backend = default_backend();
  if (dynamic_cast<PipeBackend*>(&backend) != nullptr) {
    json jmodels = json::array();
    for (const CompiledModel& m : models) jmodels.push_back(model_to_json(m));
    json req = {{"op", "solve_batch"}, {"models", std::move(jmodels)},
                {"options", options_to_json(options)}};
    json resp = client().request(req);
    std::vector<BackendResult> out;
    out.reserve(models.size());
    for (size_t i = 0; i < models.size(); ++i) {
      BackendResult r = result_from_json(resp["results"][i]);
      r.objective += models[i].obj_constant;
      out.push_back(std::move(r));
    }
    return out;
  }
  std::vector<BackendResult> out;
  out.reserve(models.size());
  for (const CompiledModel& m : models) out.push_back(backend.solve(m, options));
  return out;
}

}  // namespace vppro
