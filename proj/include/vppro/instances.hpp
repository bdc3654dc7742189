#pragma once

// Bundled and synthetic instances: tiny cases for oracle-backed tests, a
// random micro-instance generator, the IEEE-33 feeder with generators at
// nodes 2/3/6, the class-archetype elasticity synthesis behind `gen-data`,
// and the crafted instance on which the traditional C&CG baseline misbehaves.

#include <cstdint>
#include <random>
#include <string>

#include "vppro/network.hpp"
#include "vppro/uncertainty.hpp"

namespace vppro {

struct Instance {
  NetworkCase net;
  ElasticityTable table;
  BudgetParams budgets;
  std::string name;
};

// root + one load node, T=1, K=2; s_base 1 so internal units are kW
Instance micro1();
// micro1 with the line rating below the worst-case demand (FC must fail)
Instance micro1_tight();
// root + one load node, T=2, K=2
Instance tiny_t2();
// root + two load nodes, T=1, K=2
Instance tiny_i2();
// weak elasticity below the reference price, strong above: traditional C&CG
// either stalls or crosses LB > UB here while the improved variant converges
Instance ddu_trap();

struct RandomMicroParams {
  int max_load_nodes = 2;
  int max_periods = 2;
  int max_intervals = 3;
  bool allow_tight_lines = false;  // lines sized below worst-case flow
  bool allow_binding_budgets = true;
};
Instance random_micro(std::uint64_t seed, const RandomMicroParams& params = {});

// IEEE-33 feeder (Baran-Wu line/load data) with generators at nodes 2, 3, 6,
// a double-peak daily profile and synthetic prices; s_base 1000 kVA.
NetworkCase ieee33_case(int periods = 24);

// --- class-archetype elasticity synthesis (gen-data) ---------------------------

struct GenDataParams {
  std::uint64_t seed = 0;
  int periods = 24;
  int intervals = 5;  // 5 reproduces the {0,0.25,0.5,1,4,16} ratio ladder
  double decay = 0.0; // extra magnitude decay with |ratio-1| distance
};

// Ratio interval boundaries for K intervals (K=5 gives the standard ladder).
std::vector<double> ratio_boundaries(int intervals);

// Elasticity bounds of one user class ("high"/"mid"/"low") in interval k.
XiBounds class_archetype(const std::string& cls, int k, int intervals, double decay);

// Deterministic node->class assignment plus the class-based table rows;
// writes `<prefix>_elasticity.csv` (class shorthand), `<prefix>_classes.csv`
// and, when `net` is non-null, `<prefix>_case.json`.
void write_gen_data(const std::string& prefix, const GenDataParams& params,
                    const NetworkCase* net, int nodes);

// Node-expanded table for a case (used to build the bundled IEEE-33 bundle).
ElasticityTable synth_elasticity(const NetworkCase& net, const GenDataParams& params);

// Day-ahead dispatch for a pinned TOU vector: min C'x s.t. Eq. (1).
FirstStageSolution first_stage_dispatch(const NetworkCase& net, const std::vector<double>& c_tou,
                                        int polygon_sides, const SolverOptions& solver);

// micro1 | micro1_tight | tiny_t2 | tiny_i2 | ddu_trap | ieee33 (seeded table)
Instance instance_by_name(const std::string& name, std::uint64_t seed = 7);

// Writes <dir>/<name>.case.json and <dir>/<name>.elasticity.csv.
void write_instance_bundle(const Instance& inst, const std::string& dir);

}  // namespace vppro
