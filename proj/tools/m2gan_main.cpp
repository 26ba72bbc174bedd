#include "m2gan/cli.hpp"

int main(int argc, char** argv) { return m2gan::run_cli(argc, argv); }
