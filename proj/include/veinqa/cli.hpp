#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace veinqa {

/// Runs one `veinqa` invocation. `args` excludes the program name. Failures
/// print a single line `veinqa: error[<kind>]: <message>` to `err`; the
/// return value is the process exit code (0 success, 2 usage, 1 otherwise).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args);

}  // namespace veinqa
