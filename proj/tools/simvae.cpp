#include <iostream>

#include "simvae/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return simvae::cli::run(args, std::cout, std::cerr);
}
