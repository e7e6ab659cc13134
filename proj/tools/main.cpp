#include <iostream>

#include "ttt/cli.hpp"

int main(int argc, char** argv) { return ttt::run_cli(argc, argv, std::cout, std::cerr); }
