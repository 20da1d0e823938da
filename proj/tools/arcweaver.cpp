#include <iostream>

#include "arcweaver/cli/commands.hpp"

int main(int argc, char** argv) { return arcweaver::cli::run(argc, argv, std::cout, std::cerr); }
