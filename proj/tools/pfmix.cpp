#include <iostream>

#include "pfmix/cli.hpp"

int main(int argc, char** argv) { return pfmix::run_cli(argc, argv, std::cout, std::cerr); }
