#include <iostream>

#include "ntrr/cli.hpp"

int main(int argc, char** argv) { return ntrr::cli::run_cli(argc, argv, std::cout, std::cerr); }
