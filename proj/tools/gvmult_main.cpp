#include "gvmult/cli_commands.hpp"

int main(int argc, char** argv) { return gvmult::run_cli(argc, argv); }
