#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jldict::cli {

// Full command-line front end, callable in-process for tests. `args` holds
// the arguments after the program name. Exit codes: 0 success, 2 usage,
// 3 data/model mismatch (including unreadable inputs), 4 corrupt model,
// 5 numerical failure, 1 anything else.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace jldict::cli
