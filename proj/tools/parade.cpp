#include "parade/cli.hpp"

int main(int argc, char** argv) { return parade::run_cli(argc, argv); }
