#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace selfgnn {

/// Entry point of the `selfgnn` command. Returns the process exit code:
/// 0 success, 1 configuration error, 2 data error, 3 numeric failure.
/// Diagnostics go to `err` as a single line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace selfgnn
