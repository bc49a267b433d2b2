#include "charstory/cli.hpp"

int main(int argc, char** argv) { return charstory::cli::run(argc, argv); }
