#include "volnet_cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return volnet::cli::run(argc, argv, std::cout, std::cerr); }
