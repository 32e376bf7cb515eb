#include <iostream>

#include "dertariff/cli.hpp"

int main(int argc, char** argv) { return dertariff::run_cli(argc, argv, std::cout, std::cerr); }
