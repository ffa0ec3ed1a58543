#include <iostream>

#include "selfgnn/cli.hpp"

int main(int argc, char** argv) { return selfgnn::run_cli(argc, argv, std::cout, std::cerr); }
