#include "disamgnn/cli.hpp"

int main(int argc, char** argv) { return disamgnn::cli::run(argc, argv); }
