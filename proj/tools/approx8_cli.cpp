#include <iostream>
#include <string>
#include <vector>

#include "approx8/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return approx8::dispatch(args, std::cout, std::cerr);
}
