#include "drive/cli.hpp"

int main(int argc, char** argv) { return drive::run(argc, argv); }
