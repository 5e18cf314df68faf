#include <malloc.h>

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return ilts::cli::run(argc, argv, std::cout, std::cerr);
}
