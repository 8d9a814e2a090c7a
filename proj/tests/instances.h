#pragma once

// Example systems shared by the test binaries.

#include <cmath>

#include <Eigen/Dense>

namespace safelearn::testing {

inline Eigen::MatrixXd FourStateAStar() {
  Eigen::MatrixXd A(4, 4);
  A << 2, 1, 4, 2,
       2, -3, -1, -2,
       -2, -3, 1, 0,
       2, 0, -2, 2;
  return A;
}

inline Eigen::MatrixXd FourStateA0() {
  Eigen::MatrixXd A(4, 4);
  A << 2.25, 0.75, 4.25, 1.75,
       2.25, -3.25, -1.25, -2.25,
       -2.00, -2.75, 1.25, 0.00,
       1.75, -0.25, -2.00, 2.00;
  return A;
}

// Two-state system whose (1,2) entry is unconstrained by the prior.
inline Eigen::MatrixXd FreeEntryAStar() {
  Eigen::MatrixXd A(2, 2);
  A << 0.5, 3.0, 0.2, -0.4;
  return A;
}

// Nonlinear part of the four-state example, bounded by gamma on the unit box.
inline Eigen::VectorXd FourStateG(const Eigen::VectorXd& x, double gamma) {
  Eigen::VectorXd g(4);
  g << x(1) * x(1) - x(2) * x(3),
       std::sqrt(std::pow(x(0), 4) + std::pow(x(2), 4)),
       x(2) * std::pow(std::sin(x(0)), 2),
       std::pow(std::sin(x(1)), 2);
  return 0.5 * gamma * g;
}

}  // namespace safelearn::testing
