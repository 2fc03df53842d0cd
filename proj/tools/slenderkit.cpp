#include <iostream>
#include <string>
#include <vector>

#include "slender/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return slender::cli::run(args, std::cout, std::cerr);
}
