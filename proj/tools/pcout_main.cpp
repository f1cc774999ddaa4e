#include "pcout/cli.hpp"

int main(int argc, char** argv) { return pcout::run_cli(argc, argv); }
