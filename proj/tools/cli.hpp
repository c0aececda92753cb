#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtls::cli {

/// Runs the `rtls` command line with `args` (excluding the program name).
/// Returns the process exit status; failures print one "error: ..." line to
/// `err`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace rtls::cli
