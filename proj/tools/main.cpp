#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return leda::cli::cli_dispatch(std::span<const std::string>(args), std::cout, std::cerr);
}
