#include "sparse_ldl.h"

#include <cmath>
#include <stdexcept>

#include <Eigen/OrderingMethods>

namespace safelearn::conic::internal {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Upper triangle of P A P' in compressed columns, from the lower triangle of
// A.
SpMat PermutedUpper(const SpMat& lower, const std::vector<int>& iperm) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(lower.nonZeros());
  for (int k = 0; k < lower.outerSize(); ++k) {
    for (SpMat::InnerIterator it(lower, k); it; ++it) {
      if (it.row() < it.col()) continue;
      int r = iperm[it.row()], c = iperm[it.col()];
      if (r > c) std::swap(r, c);
      trip.emplace_back(r, c, it.value());
    }
  }
  SpMat upper(lower.rows(), lower.cols());
  upper.setFromTriplets(trip.begin(), trip.end());
  upper.makeCompressed();
  return upper;
}

}  // namespace

void SparseLdl::Analyze(const SpMat& pattern, const std::vector<int>& signs) {
  n_ = static_cast<int>(pattern.rows());
  if (pattern.cols() != n_ || static_cast<int>(signs.size()) != n_) {
    throw std::invalid_argument("SparseLdl: dimension mismatch");
  }
  // AMD on the full symmetric pattern.
  SpMat full = pattern.selfadjointView<Eigen::Lower>();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
  Eigen::AMDOrdering<int> ordering;
  ordering(full, amd);
  perm_.assign(amd.indices().data(), amd.indices().data() + n_);
  iperm_.assign(n_, 0);
  for (int k = 0; k < n_; ++k) iperm_[perm_[k]] = k;
  signs_.assign(n_, 1);
  for (int k = 0; k < n_; ++k) signs_[k] = signs[perm_[k]];

  const SpMat upper = PermutedUpper(pattern, iperm_);
  const int* ap = upper.outerIndexPtr();
  const int* ai = upper.innerIndexPtr();
  parent_.assign(n_, -1);
  lnz_.assign(n_, 0);
  std::vector<int> flag(n_);
  for (int k = 0; k < n_; ++k) {
    flag[k] = k;
    for (int p = ap[k]; p < ap[k + 1]; ++p) {
      for (int i = ai[p]; i < k && flag[i] != k; i = parent_[i]) {
        if (parent_[i] == -1) parent_[i] = k;
        ++lnz_[i];
        flag[i] = k;
      }
    }
  }
  lp_.assign(n_ + 1, 0);
  for (int k = 0; k < n_; ++k) lp_[k + 1] = lp_[k] + lnz_[k];
  li_.assign(lp_[n_], 0);
  lx_.assign(lp_[n_], 0.0);
  d_.resize(n_);
}

bool SparseLdl::Factor(const SpMat& lower, double eps, double delta) {
  if (lower.rows() != n_ || lower.cols() != n_) return false;
  const SpMat upper = PermutedUpper(lower, iperm_);
  const int* ap = upper.outerIndexPtr();
  const int* ai = upper.innerIndexPtr();
  const double* ax = upper.valuePtr();
  std::vector<double> y(n_, 0.0);
  std::vector<int> pattern(n_), flag(n_);
  std::fill(lnz_.begin(), lnz_.end(), 0);
  regularized_ = 0;
  for (int k = 0; k < n_; ++k) {
    int top = n_;
    flag[k] = k;
    for (int p = ap[k]; p < ap[k + 1]; ++p) {
      int i = ai[p];
      y[i] += ax[p];
      int len = 0;
      for (; i < k && flag[i] != k; i = parent_[i]) {
        pattern[len++] = i;
        flag[i] = k;
      }
      while (len > 0) pattern[--top] = pattern[--len];
    }
    double dk = y[k];
    y[k] = 0.0;
    for (; top < n_; ++top) {
      const int i = pattern[top];
      const double yi = y[i];
      y[i] = 0.0;
      const int p_end = lp_[i] + lnz_[i];
      for (int p = lp_[i]; p < p_end; ++p) y[li_[p]] -= lx_[p] * yi;
      const double l_ki = yi / d_(i);
      dk -= l_ki * yi;
      li_[p_end] = k;
      lx_[p_end] = l_ki;
      ++lnz_[i];
    }
    if (!(signs_[k] * dk > eps)) {
      if (!std::isfinite(dk)) return false;
      dk = signs_[k] * delta;
      ++regularized_;
    }
    d_(k) = dk;
  }
  return true;
}

Eigen::VectorXd SparseLdl::Solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x(n_);
  for (int k = 0; k < n_; ++k) x(k) = rhs(perm_[k]);
  for (int j = 0; j < n_; ++j) {
    const double xj = x(j);
    for (int p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) x(li_[p]) -= lx_[p] * xj;
  }
  x.array() /= d_.array();
  for (int j = n_ - 1; j >= 0; --j) {
    double xj = x(j);
    for (int p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) xj -= lx_[p] * x(li_[p]);
    x(j) = xj;
  }
  Eigen::VectorXd out(n_);
  for (int k = 0; k < n_; ++k) out(perm_[k]) = x(k);
  return out;
}

}  // namespace safelearn::conic::internal
