#include "pixmix/cli.hpp"

int main(int argc, char** argv) { return pixmix::cli_run(argc, argv); }
