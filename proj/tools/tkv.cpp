#include <iostream>
#include <string>
#include <vector>

#include "tkv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tkv::cli::run(std::move(args), std::cout, std::cerr);
}
