#include "streamtrack/cli.hpp"

int main(int argc, char** argv) { return streamtrack::cli::run(argc, argv); }
