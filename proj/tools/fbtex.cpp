#include <iostream>
#include <string>
#include <vector>

#include "fbtex/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fbtex::run_cli(args, std::cout, std::cerr);
}
