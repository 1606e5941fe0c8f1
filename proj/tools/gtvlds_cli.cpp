#include <iostream>

#include "gtvlds/commands.hpp"

int main(int argc, char** argv) { return gtvlds::run_cli(argc, argv, std::cout, std::cerr); }
