#include <iostream>

#include "peelkit/cli.hpp"

int main(int argc, char** argv) { return peelkit::cli::main(argc, argv, std::cout, std::cerr); }
