#include <iostream>
#include <string>
#include <vector>

#include "matweight_tools/experiments.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return matweight::tools::run_cli(args, std::cout, std::cerr);
}
