#include "offsetcal/cli.hpp"

int main(int argc, char** argv) { return offsetcal::run_cli(argc, argv); }
