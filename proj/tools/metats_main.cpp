#include <iostream>

#include "metats/cli.hpp"

int main(int argc, char** argv) { return metats::run_cli(argc, argv, std::cout, std::cerr); }
