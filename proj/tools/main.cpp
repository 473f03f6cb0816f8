#include "shadowfix/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return shadowfix::cli::run(argc, argv, std::cout, std::cerr); }
