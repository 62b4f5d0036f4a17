#include <iostream>

#include "cl3d/cli/commands.hpp"

int main(int argc, char** argv) { return cl3d::run_cli(argc, argv, std::cout, std::cerr); }
