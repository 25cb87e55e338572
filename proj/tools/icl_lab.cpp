#include <iostream>
#include <string>
#include <vector>

#include "icl/runner.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return icl::cli_main(args, std::cout, std::cerr);
}
