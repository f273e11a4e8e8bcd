#include "riskcal/cli.hpp"

int main(int argc, char** argv) { return riskcal::cli::run_cli(argc, argv); }
