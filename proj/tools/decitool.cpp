#include <iostream>

#include "decitool/commands.hpp"

int main(int argc, char** argv) { return decitool::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
