#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"

namespace safelearn::conic {

// a -> a'Qa + q'a + r
struct QuadraticForm {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double r = 0.0;

  int dimension() const { return static_cast<int>(q.size()); }
  double Evaluate(const Eigen::VectorXd& a) const {
    return a.dot(Q * a) + q.dot(a) + r;
  }
  // Throws if Q is not square/symmetric or q has the wrong length.
  void Validate(double symmetry_tol = 1e-12) const;
};

// [[r, q'/2], [q/2, Q]]; PSD iff the form is nonnegative everywhere.
Eigen::MatrixXd QuadraticNonnegToPsd(const QuadraticForm& form);

// Quadratic form whose coefficients are affine in the program's decision
// variables. Only the lower triangle of Q is read.
struct AffineQuadraticForm {
  std::vector<std::vector<AffineExpr>> Q;
  std::vector<AffineExpr> q;
  AffineExpr r;

  explicit AffineQuadraticForm(int dimension);
  int dimension() const { return static_cast<int>(q.size()); }
};

// Adds the linear matrix inequality equivalent to "form(a) >= 0 for all a".
BlockId AddQuadraticNonneg(ConicProgram& program,
                           const AffineQuadraticForm& form,
                           std::string name = "");

// A p-norm exponent: rational num/den >= 1, or infinity.
struct NormOrder {
  long num = 2;
  long den = 1;
  bool infinite = false;

  static NormOrder Infinity() { return {1, 1, true}; }
  static NormOrder Rational(long num, long den);
  // Nearest rational with denominator <= 64; "inf" handled by callers.
  static NormOrder FromDouble(double p);
  double value() const;
  std::string ToString() const;
};

double PNorm(const Eigen::VectorXd& x, const NormOrder& p);

struct Epigraph {
  int t = -1;               // variable index with t >= ||x||_p^d
  std::vector<BlockId> blocks;
};

// Introduces t with t >= ||x||_p^d using linear and second-order cone
// constraints only.
Epigraph AddPnormPowerEpigraph(ConicProgram& program,
                               const std::vector<AffineExpr>& x,
                               const NormOrder& p, int d);

// s <= prod_i w_i^(weights_i / denominator), weights summing to denominator,
// with every w_i implicitly constrained nonnegative and s >= 0.
void AddGeometricMean(ConicProgram& program, const std::vector<AffineExpr>& w,
                      const std::vector<long>& weights, long denominator,
                      const AffineExpr& s, std::vector<BlockId>& blocks);

}  // namespace safelearn::conic
