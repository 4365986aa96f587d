#include <iostream>
#include <string>
#include <vector>

#include "exitscope/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return exitscope::run_cli(args, std::cout, std::cerr);
}
