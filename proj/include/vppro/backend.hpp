#pragma once

// Solver backend adapter contract.  A backend receives a CompiledModel
// (variables, bounds, integrality, CSR rows, linear objective in minimize
// form) and returns status / primal / optional duals / objective.
//
// Two adapters ship with the project:
//  - PipeBackend (default): drives `tools/solve_model.py --serve`, a
//    persistent SciPy/HiGHS process, over a JSON-lines pipe.  One child
//    process per thread.
//  - MpsFileBackend: emits standard free-format MPS and invokes an external
//    solver command, then parses a solution file.  This is the fallback
//    pathway for driving any MILP solver binary without API linkage.
//
// Selection: env VPP_SOLVER_BACKEND = "pipe" (default) | "mps".
// Related env vars: VPP_PYTHON (python interpreter), VPP_SOLVER_DRIVER
// (path to solve_model.py), VPP_SOLVER_MPS_CMD (command template with {mps}
// and {sol} placeholders; defaults to the bundled driver in --mps mode).

#include <memory>
#include <string>

#include "vppro/model.hpp"

namespace vppro {

struct BackendResult {
  SolveStatus status = SolveStatus::limit;
  bool solved = false;  // primal available
  double objective = 0.0;
  std::vector<double> primal;
  std::vector<double> dual;  // empty if unavailable
  double gap = 0.0;
  std::string message;
};

class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual BackendResult solve(const CompiledModel& model, const SolverOptions& options) = 0;
  virtual std::string name() const = 0;
};

class PipeBackend final : public SolverBackend {
 public:
  BackendResult solve(const CompiledModel& model, const SolverOptions& options) override;
  std::string name() const override { return "pipe-scipy-highs"; }
};

class MpsFileBackend final : public SolverBackend {
 public:
  BackendResult solve(const CompiledModel& model, const SolverOptions& options) override;
  std::string name() const override { return "mps-file"; }
};

// Process-wide backend per VPP_SOLVER_BACKEND; thread-safe.
SolverBackend& default_backend();

// Solve several models in one backend round-trip where the backend supports
// it (pipe backend); sequential otherwise.
std::vector<BackendResult> solve_batch(const std::vector<CompiledModel>& models,
                                       const SolverOptions& options);

// Resolution helpers (exposed for tests/CLI diagnostics).
std::string python_command();
std::string driver_path();

}  // namespace vppro
