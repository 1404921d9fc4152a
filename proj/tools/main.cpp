#include <iostream>

#include "xraydet/cli.hpp"

int main(int argc, char** argv) {
  return xraydet::cli::run(argc, argv, std::cout, std::cerr);
}
