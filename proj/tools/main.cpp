#include "cli.hpp"

int main(int argc, char** argv) { return genesis::cli::run(argc, argv); }
