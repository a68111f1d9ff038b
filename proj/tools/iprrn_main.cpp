#include <iostream>
#include <string>
#include <vector>

#include "iprrn/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return iprrn::run_cli(args, std::cout, std::cerr);
}
