#pragma once

// Free-format MPS emission and solution-file parsing for the exchange-file
// solver pathway.  Row/column naming: objective row OBJ, constraint rows
// c<i>, columns x<i>.  The objective constant is stored as the negated RHS of
// the objective row (standard convention).  Models are always written in
// minimize form (callers pre-negate for maximization).
//
// Solution file format accepted by parse_solution_file:
//   =status= optimal|infeasible|unbounded|limit
//   =objective= <value>       (includes the MPS-encoded constant)
//   =gap= <value>
//   =columns=
//   x0 <value>
//   ...
//   =rows=                    (optional; LP duals)
//   c0 <value>

#include <iosfwd>
#include <string>

#include "vppro/backend.hpp"

namespace vppro {

void write_free_mps(const CompiledModel& model, std::ostream& os,
                    const std::string& name = "VPPRO");

BackendResult parse_solution_file(const std::string& path, const CompiledModel& model);

}  // namespace vppro
