#include "cli_support.hpp"

int main(int argc, char** argv) { return polyrelax::cli::run_cli(argc, argv); }
