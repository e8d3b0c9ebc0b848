#include "gpshape/cli.h"

int main(int argc, char** argv) { return gpshape::cli::run(argc, argv); }
