// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "futurecall/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return futurecall::run_cli(args, std::cout, std::cerr);
}
