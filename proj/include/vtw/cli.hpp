#pragma once

#include <string>
#include <vector>

namespace vtw {

// Command-line entry point, callable in-process for tests. `args` excludes
// the program name. Returns 0 on success, 1 on operational errors, 2 on
// usage errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace vtw
