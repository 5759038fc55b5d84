#include <iostream>
#include <string>
#include <vector>

#include "canon_lti/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return canon_lti::cli::run_cli(args, std::cout, std::cerr);
}
