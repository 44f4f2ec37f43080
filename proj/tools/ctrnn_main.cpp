#include "ctrnn/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return ctrnn::cli::run(argc, argv, std::cout, std::cerr);
}
