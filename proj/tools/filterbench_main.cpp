#include "filterbench/io.hpp"

int main(int argc, char** argv) { return fb::run_cli(argc, argv); }
