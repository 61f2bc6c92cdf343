#include "otrom/cli.hpp"

int main(int argc, char** argv) { return otrom::cli::run(argc, argv); }
