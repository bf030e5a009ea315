#include "nilnet/cli.hpp"

int main(int argc, char** argv) { return nilnet::cli::dispatch(argc, argv); }
