#include "cobra/cli.hpp"

#include <iostream>

int main(int argc, char **argv)
{
    return cobra::cli::main(argc, argv, std::cout, std::cerr);
}
