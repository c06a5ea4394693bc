#include "fowler/cli.hpp"

int main(int argc, char** argv) { return fowler::cli_main(argc, argv); }
