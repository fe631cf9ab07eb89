#include "maxem/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return maxem::run_cli(argc, argv, std::cout, std::cerr); }
