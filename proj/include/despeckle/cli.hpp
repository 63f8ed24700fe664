#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace despeckle {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

// Runs one `despeckle` invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace despeckle
