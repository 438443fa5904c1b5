#include "cli.hpp"

int main(int argc, char** argv) { return sewkit_main(argc, argv); }
