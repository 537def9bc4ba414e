#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace topmind::cli {

/// Runs the `topmind` command line. `args` excludes the program name.
/// Returns the process exit code: 0 ok, 1 stage failure, 2 usage or
/// configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topmind::cli
