#include "pime/harness/cli.hpp"

int main(int argc, char** argv) { return pime::harness::cli_main(argc, argv); }
