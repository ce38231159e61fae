#include "pwnn/runtime.hpp"

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pwnn {

void tune_allocator() {
#if defined(__GLIBC__)
  // 32 MiB is the largest threshold mallopt accepts on 64-bit glibc.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace pwnn
