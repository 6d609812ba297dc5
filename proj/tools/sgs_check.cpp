#include <iostream>

#include "sgs/cli.hpp"

int main(int argc, char** argv) {
    return sgs::cli::main({argv + 1, argv + argc}, std::cout, std::cerr);
}
