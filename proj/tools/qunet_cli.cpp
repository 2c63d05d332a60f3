#include "qunet/app/cli.hpp"

int main(int argc, char** argv) { return qunet::app::cli_dispatch(argc, argv); }
