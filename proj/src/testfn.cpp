#include "pwnn/testfn.hpp"

namespace pwnn {

std::string to_string(TestFunctionKind kind) {
  switch (kind) {
    case TestFunctionKind::Wendland: return "wendland";
    case TestFunctionKind::Bump: return "bump";
  }
  return "?";
}

TestFunctionKind test_function_from_string(const std::string& name) {
  if (name == "wendland") return TestFunctionKind::Wendland;
  if (name == "bump") return TestFunctionKind::Bump;
  throw ConfigError("unknown test function '" + name + "' (expected wendland, bump)");
}

}  // namespace pwnn
