#include <iostream>

#include "decem/cli.hpp"

int main(int argc, char** argv) { return decem::cli::run(argc, argv, std::cout, std::cerr); }
