#include "kst/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return kst::run_cli(argc, argv, std::cout, std::cerr); }
