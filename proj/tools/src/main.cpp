#include <iostream>

#include "doseins_tools/cli.hpp"

int main(int argc, char** argv) { return doseins::run_cli(argc, argv, std::cout, std::cerr); }
