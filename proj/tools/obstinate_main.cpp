#include <iostream>

#include "obstinate/cli.hpp"

int main(int argc, char** argv) { return obstinate::run_cli(argc, argv, std::cout, std::cerr); }
