#include "ssondo/commands.hpp"

int main(int argc, char** argv) { return ssondo::run_cli(argc, argv); }
