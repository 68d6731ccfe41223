#include "ecodrive/cli.hpp"

int main(int argc, char** argv) { return ecodrive::run_cli(argc, argv); }
