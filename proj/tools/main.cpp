#include "cli.hpp"

int main(int argc, char** argv) { return eim::cli::run(argc, argv); }
