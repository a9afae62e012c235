#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icrl {

// Full command-line surface (run | capacity | report | compare | replay).
// args excludes the program name. Returns the process exit code; all output
// goes through the supplied streams so tests can drive it in-process.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace icrl
