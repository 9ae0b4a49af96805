#include <iostream>

#include "sdp/experiments.hpp"

int main(int argc, char** argv) { return sdp::run_cli(argc, argv, std::cout, std::cerr); }
