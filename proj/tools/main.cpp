#include "cli.hpp"

int main(int argc, char** argv) { return bwvi::cli::main_entry(argc, argv); }
