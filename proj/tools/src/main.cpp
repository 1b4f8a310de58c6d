#include <iostream>
#include <string>
#include <vector>

#include "fairscrub_cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairscrub::cli::run_cli(args, std::cout, std::cerr);
}
