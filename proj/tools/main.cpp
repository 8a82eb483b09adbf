#include <iostream>
#include <string>
#include <vector>

#include "dpql/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return dpql::cli::run(args, std::cout, std::cerr);
}
