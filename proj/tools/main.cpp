#include "decaug/cli.hpp"

int main(int argc, char** argv) { return decaug::cli::run(argc, argv); }
