#include <iostream>

#include "wgmr/cli.hpp"

int main(int argc, char** argv) {
  return wgmr::cli::run_cli(argc, argv, std::cout, std::cerr);
}
