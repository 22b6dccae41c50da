#include "cadenza/cli/cli.hpp"

int main(int argc, char** argv) { return cadenza::cli::run(argc, argv); }
