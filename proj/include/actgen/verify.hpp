#pragma once

#include <iosfwd>

namespace actgen {

/// Runs the full invariant suite at small scale: math-kernel identities,
/// gradient oracles, statistical checks, guidance and loop properties,
/// persistence round trips. Prints one line per check and returns the number
/// of failures (0 = all good).
int run_verify(std::ostream& out);

}  // namespace actgen
