#include <iostream>

#include "percoloc/cli.hpp"

int main(int argc, char** argv) {
  return percoloc::cli::run(argc, argv, std::cout, std::cerr);
}
