#include <iostream>

#include "srender/cli.hpp"

int main(int argc, char** argv) { return srender::dispatch(argc, argv, std::cout, std::cerr); }
