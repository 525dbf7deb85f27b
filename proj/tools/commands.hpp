#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cf::cli {

// Runs one CLI invocation. args excludes the program name. Returns the process exit code:
// 0 success, 1 validation/format error, 2 runtime failure. Errors are reported on `err`
// as "error[<category>]: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cf::cli
