#include "fmicl/cli.hpp"

#include <iostream>

int
main(int argc, char** argv)
{
  return fmicl::cli::main_entry(argc, argv, std::cout, std::cerr);
}
