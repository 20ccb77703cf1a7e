#include "maskexplain/cli.hpp"

int main(int argc, char** argv) { return maskexplain::cli::run(argc, argv); }
