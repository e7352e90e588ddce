#include "gppm/cli.hpp"

int main(int argc, char** argv) { return gppm::run_cli(argc, argv); }
