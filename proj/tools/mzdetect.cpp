#include <iostream>

#include "mzdetect/cli.hpp"

int main(int argc, char** argv) { return mzd::run_cli(argc, argv, std::cout, std::cerr); }
