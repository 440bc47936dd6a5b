#include "evolmpnn/cli.hpp"

int main(int argc, char** argv) { return evolmpnn::dispatch(argc, argv); }
