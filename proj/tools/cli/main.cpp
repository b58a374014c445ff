#include "cli.hpp"

int main(int argc, char** argv) { return ause::cli::run(argc, argv); }
