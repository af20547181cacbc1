#pragma once

#include <string>
#include <vector>

namespace aloocv {

/// Runs the command-line interface on argv-style arguments (without
/// the program name). Returns the process exit code: 0 success, 1
/// validation error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace aloocv
