#pragma once

#include <iosfwd>

namespace maxem {

/// Entry point of the `maxem` tool: fit, select, test, simulate, replicate.
/// Results go to `out` (or the --out file), diagnostics to `err`. Returns 0 on
/// success and 1 on any error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maxem
