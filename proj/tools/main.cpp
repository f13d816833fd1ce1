#include <iostream>

#include "mivkoz/cli.hpp"

int main(int argc, char** argv) { return mivkoz::run_cli(argc, argv, std::cout, std::cerr); }
