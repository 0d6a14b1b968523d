#include "cli.hpp"

int main(int argc, char** argv) { return spdmidas::cli::run(argc, argv); }
