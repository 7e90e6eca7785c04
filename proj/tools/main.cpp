#include <iostream>

#include "tmn/cli.hpp"

int main(int argc, char** argv) { return tmn::cli::run(argc, argv, std::cout, std::cerr); }
