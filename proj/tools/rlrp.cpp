#include <iostream>

#include "rlrp/cli.hpp"

int main(int argc, char** argv) { return rlrp::run_cli(argc, argv, std::cout, std::cerr); }
