#include "gapfill/cli.hpp"

int main(int argc, char** argv) { return gapfill::cli::run(argc, argv); }
