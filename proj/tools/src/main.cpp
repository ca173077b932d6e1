#include <iostream>
#include <string>
#include <vector>

#include "bridgeaudit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bridgeaudit::cli::run(args, std::cout, std::cerr);
}
