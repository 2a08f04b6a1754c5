#include <iostream>
#include <string>
#include <vector>

#include "bse/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return bse::cli::run(args, std::cout, std::cerr);
}
