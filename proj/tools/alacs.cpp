#include "alacs/cli.hpp"

int main(int argc, char** argv) { return alacs::run_cli(argc, argv); }
