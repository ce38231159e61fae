#ifndef PWNN_TESTFN_HPP
#define PWNN_TESTFN_HPP

// Compactly supported radial test functions phi(r), r = |x - c| / R, and the
// spatial gradient grad_x phi = phi'(r) (x - c) / (R |x - c|).

#include "pwnn/common.hpp"

#include <cmath>
#include <string>

namespace pwnn {

enum class TestFunctionKind {
  /// Wendland phi_{d,2}, smoothness index l = floor(d/2) + 3.
  Wendland,
  /// exp(1 - 1/(1 - r^2))
  Bump,
};

std::string to_string(TestFunctionKind kind);
TestFunctionKind test_function_from_string(const std::string& name);

struct TestFunction {
  TestFunctionKind kind = TestFunctionKind::Wendland;
  Index dim = 1;

  int wendland_l() const { return static_cast<int>(dim / 2) + 3; }
  void validate() const {
    if (dim < 1) throw ContractError("TestFunction: dimension must be >= 1, got " + std::to_string(dim));
  }
};

/// Below this distance from the centre the gradient is returned as zero.
inline constexpr double kCenterEps = 1e-12;

template <typename Scalar>
Scalar csrbf_value(const TestFunction& fn, Scalar r) {
  using std::exp;
  using std::pow;
  if (!(r >= Scalar(0))) throw ContractError("csrbf_value: r must be non-negative");
  if (r >= Scalar(1)) return Scalar(0);
  switch (fn.kind) {
    case TestFunctionKind::Wendland: {
      const Scalar l = Scalar(fn.wendland_l());
      const Scalar poly = (l * l + 4 * l + 3) * r * r + (3 * l + 6) * r + 3;
      return pow(Scalar(1) - r, fn.wendland_l() + 2) / Scalar(3) * poly;
    }
    case TestFunctionKind::Bump:
      return exp(Scalar(1) - Scalar(1) / (Scalar(1) - r * r));
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar csrbf_dr(const TestFunction& fn, Scalar r) {
  using std::exp;
  using std::pow;
  if (!(r >= Scalar(0))) throw ContractError("csrbf_dr: r must be non-negative");
  if (r >= Scalar(1)) return Scalar(0);
  switch (fn.kind) {
    case TestFunctionKind::Wendland: {
      const int li = fn.wendland_l();
      const Scalar l = Scalar(li);
      const Scalar a = l * l + 4 * l + 3;
      const Scalar b = 3 * l + 6;
      const Scalar poly = a * r * r + b * r + 3;
      const Scalar dpoly = 2 * a * r + b;
      const Scalar q = Scalar(1) - r;
      return pow(q, li + 1) / Scalar(3) * (q * dpoly - (l + 2) * poly);
    }
    case TestFunctionKind::Bump: {
      const Scalar q = Scalar(1) - r * r;
      return -Scalar(2) * r / (q * q) * exp(Scalar(1) - Scalar(1) / q);
    }
  }
  return Scalar(0);
}

/// Gradient in x of phi(|x - center| / R).
template <typename DerivedX, typename DerivedC>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> grad_x_testfn(const TestFunction& fn,
                                                                         const Eigen::MatrixBase<DerivedX>& x,
                                                                         const Eigen::MatrixBase<DerivedC>& center,
                                                                         typename DerivedX::Scalar R) {
  using Scalar = typename DerivedX::Scalar;
  if (!(R > Scalar(0))) throw ContractError("grad_x_testfn: R must be positive");
  if (x.size() != center.size()) {
    throw ShapeError("grad_x_testfn: point has " + std::to_string(x.size()) + " coordinates, centre " +
                     std::to_string(center.size()));
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> diff = x.reshaped() - center.reshaped();
  const Scalar dist = diff.norm();
  if (dist < Scalar(kCenterEps)) return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(x.size());
  const Scalar r = dist / R;
  return diff * (csrbf_dr(fn, r) / (R * dist));
}

}  // namespace pwnn

#endif  // PWNN_TESTFN_HPP
