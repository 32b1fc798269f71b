#pragma once

#include <string>

#include "nmc/bsde.hpp"
#include "nmc/config.hpp"
#include "nmc/forward.hpp"
#include "nmc/geometry.hpp"

namespace nmc {

// Materialize library objects from the declarative run description.
ConvexDomain build_domain(const DomainConfig& config);
DiffusionSpec build_diffusion(const DiffusionConfig& config);
// The eigenfunction builtin reads its interval bounds off the (necessarily
// one-dimensional) domain.
NeumannProblem build_problem(const ProblemConfig& config, const DomainConfig& domain);
Scheme build_scheme(const std::string& name, double n);
Stepping build_stepping(const SteppingConfig& config);

// Executes the configured command: writes the command's CSV artifact plus
// summary.txt into config.out_dir (created if needed) and echoes the summary
// and the wall-clock time to stdout.  Returns 0 on success and 1 when a
// study verdict fails; invalid inputs and I/O failures throw.
int run(const RunConfig& config);

}  // namespace nmc
