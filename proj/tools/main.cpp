#include "justgen/cli.hpp"

int main(int argc, char** argv) { return justgen::run_cli(argc, argv); }
