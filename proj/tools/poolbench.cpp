#include <iostream>

#include "poolbench/cli.hpp"

int main(int argc, char** argv) { return poolbench::run_cli(argc, argv, std::cout, std::cerr); }
