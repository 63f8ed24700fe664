#include <iostream>

#include "despeckle/cli.hpp"

int main(int argc, char** argv) {
    return despeckle::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
