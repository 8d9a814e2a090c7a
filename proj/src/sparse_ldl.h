#pragma once

#include <vector>

#include <Eigen/Sparse>

namespace safelearn::conic::internal {

// Up-looking sparse LDL' factorization of a symmetric quasidefinite matrix
// with a fill-reducing ordering and dynamic pivot regularization: a pivot
// whose sign disagrees with the expected sign (or is tiny) is replaced by
// sign * delta.
class SparseLdl {
 public:
  // `signs[i]` is +1 or -1, the expected sign of pivot i in the original
  // ordering. `pattern` holds the lower triangle, including every diagonal
  // entry; later matrices must share its sparsity pattern.
  void Analyze(const Eigen::SparseMatrix<double>& pattern,
               const std::vector<int>& signs);

  // Returns false if the matrix does not match the analyzed pattern size.
  bool Factor(const Eigen::SparseMatrix<double>& lower, double eps = 1e-13,
              double delta = 2e-7);

  Eigen::VectorXd Solve(const Eigen::VectorXd& rhs) const;

  int regularized_pivots() const { return regularized_; }
  const Eigen::VectorXd& d() const { return d_; }

 private:
  int n_ = 0;
  std::vector<int> perm_, iperm_;  // perm_[k] = original index of pivot k
  std::vector<int> signs_;         // in permuted order
  std::vector<int> parent_, lnz_, lp_;
  std::vector<int> li_;
  std::vector<double> lx_;
  Eigen::VectorXd d_;
  int regularized_ = 0;
};

}  // namespace safelearn::conic::internal
