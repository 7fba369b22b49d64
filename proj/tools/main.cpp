#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "solar_ddpg/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Network-sized temporaries would otherwise be mmapped and unmapped on
    // every training step.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    std::vector<std::string> args(argv + 1, argv + argc);
    return solar_ddpg::run_cli(args, std::cout, std::cerr);
}
