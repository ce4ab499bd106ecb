#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kmlp::cli {

// Runs one `kmlp` invocation. args[0] is the program name. Returns the
// process exit code: 0 success, 1 user or configuration error, 2 internal
// invariant violation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kmlp::cli
