#include "eegstate/cli.hpp"

int main(int argc, char** argv) { return eegstate::run_cli(argc, argv); }
