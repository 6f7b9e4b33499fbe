#include <iostream>

#include "neurospect/cli.hpp"

int main(int argc, char** argv) {
  return neurospect::cli::run_cli(argc, argv, std::cout, std::cerr);
}
