#include <iostream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "engression/cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training reallocates the same large buffers every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  std::vector<std::string> args(argv + 1, argv + argc);
  return engression::run_cli(args, std::cout, std::cerr);
}
