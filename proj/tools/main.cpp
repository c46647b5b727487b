#include "usseg/cli.hpp"

int main(int argc, char** argv) { return usseg::cli_dispatch(argc, argv); }
