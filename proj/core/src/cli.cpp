#include "ctx/cli.hpp"

#include <ostream>

namespace ctx {

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  (void)args;
  (void)out;
  err << "usage: ctx <check|run|dump-core|bench> ...\n";
  return 2;
}

}  // namespace ctx
