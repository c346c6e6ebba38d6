#pragma once

#include <string>
#include <vector>

namespace sbreak {

// Full command-line front end, callable in-process for tests.  `args` is the
// argument list without the program name.  Returns the process exit code:
// 0 success, 1 failed study gate, 2 config/usage error, 3 estimation
// degeneracy, 4 I/O error.
int run_cli(const std::vector<std::string>& args);

}  // namespace sbreak
