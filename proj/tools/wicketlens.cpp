#include "wicketlens/cli.hpp"

int main(int argc, char** argv) { return wicketlens::run_cli(argc, argv); }
