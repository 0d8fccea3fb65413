#include <iostream>

#include "stowave/cli.hpp"

int main(int argc, char** argv) { return stowave::cli_main(argc, argv, std::cout, std::cerr); }
