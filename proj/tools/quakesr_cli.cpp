#include "quakesr/cli/dispatch.hpp"

int main(int argc, char** argv) { return quakesr::cli::run(argc, argv); }
