#include "commands.hpp"

int main(int argc, char** argv) { return rrq::cli::run(argc, argv); }
