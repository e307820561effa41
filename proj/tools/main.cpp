#include "hydrad/cli.hpp"

int main(int argc, char** argv)
{
  return hydrad::cli::main(argc, argv);
}
