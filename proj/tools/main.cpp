#include "cli.hpp"

int main(int argc, char** argv) { return cfp::cli::dispatch(argc, argv); }
