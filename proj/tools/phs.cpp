#include "phs/cli.hpp"

int main(int argc, char** argv) { return phs::cli::main(argc, argv); }
