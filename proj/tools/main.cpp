#include "commands.hpp"

int main(int argc, char** argv) { return fedecg::cli::run(argc, argv); }
