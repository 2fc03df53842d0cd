#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace slender::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInputIntegrity = 2,
    kInternal = 3,
};

/// Runs one `slenderkit` invocation. args[0] is the program name.
/// Output files are written atomically; the one-line summary goes to `out`
/// (or to `err` when the result itself is printed to `out`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slender::cli
