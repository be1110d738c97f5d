#include <iostream>

#include "lcam/cli.hpp"

int main(int argc, char** argv) { return lcam::cli::dispatch(argc, argv, std::cout, std::cerr); }
