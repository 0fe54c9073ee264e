#include "metafold/cli.hpp"

int main(int argc, char** argv) { return metafold::run_cli(argc, argv); }
