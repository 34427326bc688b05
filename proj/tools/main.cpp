#include "uhisr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return uhisr::run_cli(argc, argv, std::cout, std::cerr); }
