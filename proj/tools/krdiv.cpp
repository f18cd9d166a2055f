#include <iostream>

#include "krdiv/cli.hpp"

int main(int argc, char** argv) { return krdiv::cli::run(argc, argv, std::cout, std::cerr); }
