#include <iostream>

#include "padrl/cli.hpp"

int main(int argc, char** argv) { return padrl::cli::run(argc, argv, std::cout, std::cerr); }
