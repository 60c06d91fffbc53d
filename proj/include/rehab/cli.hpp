#pragma once

#include <string>
#include <vector>

namespace rehab {

// Runs the command line interface. args excludes the program name. Returns
// the process exit code: 0 success, 1 pipeline error, 2 usage error.
int run_cli(const std::vector<std::string>& args);

}  // namespace rehab
