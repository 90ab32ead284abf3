#include "swlrt/cli.hpp"

int main(int argc, char** argv) { return swlrt::cli::run_cli(argc, argv); }
