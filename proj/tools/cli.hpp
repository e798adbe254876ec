#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace r2s {

/// Runs the r2s command line. `args` excludes the program name.
/// Returns 0 on success, 1 on data/validation errors, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace r2s
