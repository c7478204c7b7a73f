#include "cmerl/harness.hpp"

int main(int argc, char** argv) { return cmerl::cli_main(argc, argv); }
