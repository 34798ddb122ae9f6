#pragma once
#include <iosfwd>
#include <string>
#include <vector>

namespace ctx {

// Subcommands: check, run, dump-core, bench. Exit codes: 0 success,
// 1 compile/run failure, 2 usage error.
int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace ctx
