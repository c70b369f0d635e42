#include <iostream>

#include "migractl/cli.hpp"

int main(int argc, char** argv) { return migractl::cli::run(argc, argv, std::cout, std::cerr); }
