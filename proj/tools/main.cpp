#include "optsim/harness.hpp"

int main(int argc, char** argv) { return optsim::harness::cli_main(argc, argv); }
