#include "pwnn/cli.hpp"
#include "pwnn/runtime.hpp"

#include <iostream>

int main(int argc, char** argv) {
  pwnn::tune_allocator();
  return pwnn::cli::main(argc, argv, std::cerr);
}
