#ifndef PWNN_COMMON_HPP
#define PWNN_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pwnn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Error categories. Callers (the CLI in particular) map these onto exit codes.

/// A precondition on an argument was violated (negative radius, topK out of range, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Matrix/vector dimensions do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested configuration cannot be realised (infeasible radius, empty quadrature, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An object was used in the wrong state (tape replayed twice, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

}  // namespace pwnn

#endif  // PWNN_COMMON_HPP
