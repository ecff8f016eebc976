#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return spheresel::cli::run(argc, argv, std::cout, std::cerr); }
