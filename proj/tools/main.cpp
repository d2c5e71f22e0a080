#include "corrpair/experiments.hpp"

int main(int argc, char** argv) { return corrpair::cli_main(argc, argv); }
