#include "softdice/cli.hpp"

int main(int argc, char** argv) { return softdice::cli::run(argc, argv); }
