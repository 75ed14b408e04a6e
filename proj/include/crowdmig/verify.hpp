#pragma once

#include <iosfwd>
#include <string>

namespace crowdmig {

// Runs the exact-computation check suite for the requested scope
// ("all", "theorem1", "mle-counterexample" or "divergence"), printing
// one line per check with computed vs expected values. Returns 0 iff
// every check passed.
int run_verify(const std::string& scope, std::ostream& out);

}  // namespace crowdmig
