#include "taps/cli.hpp"

int main(int argc, char** argv) { return taps::run_cli(argc, argv); }
