#include "cli.hpp"

int main(int argc, char** argv) { return ggq::cli::main(argc, argv); }
