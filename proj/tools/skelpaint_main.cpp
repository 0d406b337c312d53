#include "skelpaint/cli.hpp"

int main(int argc, char** argv) { return skelpaint::run_cli(argc, argv); }
