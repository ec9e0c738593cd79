#include <iostream>

#include "fastpt/cli.hpp"

int main(int argc, char** argv) { return fastpt::run_cli(argc, argv, std::cout, std::cerr); }
