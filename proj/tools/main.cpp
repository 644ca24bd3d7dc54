#include "cli.hpp"

int main(int argc, char** argv) { return strobomech::cli::main(argc, argv); }
