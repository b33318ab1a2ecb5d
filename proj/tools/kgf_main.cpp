#include <iostream>

#include "kgf/cli.hpp"

int main(int argc, char** argv) { return kgf::cli::dispatch(argc, argv, std::cout, std::cerr); }
