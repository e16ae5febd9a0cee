#include "ppop/cli.hpp"

int main(int argc, char** argv) { return ppop::cli::run(argc, argv); }
