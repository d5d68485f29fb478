#include <iostream>

#include "tbn/cli.hpp"

int main(int argc, char** argv) { return tbn::cli::run(argc, argv, std::cout, std::cerr); }
