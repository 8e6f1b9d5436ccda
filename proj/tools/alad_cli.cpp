#include "alad/cli.hpp"

int main(int argc, char** argv) { return alad::run_cli(argc, argv); }
