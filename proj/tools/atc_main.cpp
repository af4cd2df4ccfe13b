#include "atc/cli.hpp"

int main(int argc, char** argv) { return atc::cli::cli_dispatch(argc, argv); }
