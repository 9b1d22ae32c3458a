#include "dmrfem/cli.hpp"

int main(int argc, char** argv) { return dmrfem::cli::dispatch(argc, argv); }
