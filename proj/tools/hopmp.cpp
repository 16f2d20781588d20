#include <iostream>

#include "hopmp/cli.hpp"

int main(int argc, char** argv) { return hopmp::cli::run(argc, argv, std::cout, std::cerr); }
