#include <iostream>

#include "stfe/cli.hpp"

int main(int argc, char** argv)
{
    return stfe::cli_dispatch(argc, argv, std::cout, std::cerr);
}
