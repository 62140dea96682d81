#include <iostream>

#include "kipm/cli.hpp"

int main(int argc, char** argv) { return kipm::cli::run(argc, argv, std::cout, std::cerr); }
