#include "dexwrite/cli.hpp"

int main(int argc, char** argv) { return dexw::cli_main(argc, argv); }
