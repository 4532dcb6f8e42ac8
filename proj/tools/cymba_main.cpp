#include "cymba/cli.hpp"

int main(int argc, char** argv) { return cymba::run_cli(argc, argv); }
