#include "reldiff/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return reldiff::run_cli(argc, argv, std::cout, std::cerr); }
