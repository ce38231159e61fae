#ifndef PWNN_RUNTIME_HPP
#define PWNN_RUNTIME_HPP

namespace pwnn {

/// Keeps large freed blocks on the heap instead of returning them to the OS.
/// Training allocates and frees multi-megabyte temporaries every layer; with
/// glibc's defaults each one is a fresh mmap whose pages fault in on first
/// touch. Process-wide, so executables opt in; a no-op off glibc.
void tune_allocator();

}  // namespace pwnn

#endif  // PWNN_RUNTIME_HPP
