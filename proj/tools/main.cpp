#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return discretize::cli::run(argc, argv, std::cout, std::cerr);
}
