#include <iostream>

#include "hypersyn/cli.hpp"

int main(int argc, char** argv) { return hypersyn::cli::run(argc, argv, std::cout, std::cerr); }
