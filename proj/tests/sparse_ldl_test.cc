#include "sparse_ldl.h"

#include <random>

#include <gtest/gtest.h>

namespace safelearn::conic::internal {
namespace {

using SpMat = Eigen::SparseMatrix<double>;

TEST(SparseLdlTest, SolvesRandomQuasidefiniteSystems) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution keep(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 6, m = 2 + trial % 5, size = n + m;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0 + std::abs(gauss(rng)));
    for (int i = 0; i < m; ++i) {
      trip.emplace_back(n + i, n + i, -1.0 - std::abs(gauss(rng)));
      for (int j = 0; j < n; ++j) {
        if (keep(rng)) trip.emplace_back(n + i, j, gauss(rng));
      }
    }
    SpMat lower(size, size);
    lower.setFromTriplets(trip.begin(), trip.end());
    std::vector<int> signs(size, -1);
    std::fill(signs.begin(), signs.begin() + n, 1);
    SparseLdl ldl;
    ldl.Analyze(lower, signs);
    ASSERT_TRUE(ldl.Factor(lower));
    EXPECT_EQ(ldl.regularized_pivots(), 0);
    Eigen::VectorXd rhs(size);
    for (int i = 0; i < size; ++i) rhs(i) = gauss(rng);
    const Eigen::MatrixXd full =
        Eigen::MatrixXd(SpMat(lower.selfadjointView<Eigen::Lower>()));
    const Eigen::VectorXd x = ldl.Solve(rhs);
    EXPECT_LT((full * x - rhs).norm(), 1e-10 * rhs.norm());
  }
}

TEST(SparseLdlTest, RegularizesZeroPivot) {
  // [[0, 1], [1, 0]] with the first pivot expected positive.
  std::vector<Eigen::Triplet<double>> trip{{0, 0, 0.0}, {1, 1, 0.0}, {1, 0, 1.0}};
  SpMat lower(2, 2);
  lower.setFromTriplets(trip.begin(), trip.end());
  SparseLdl ldl;
  ldl.Analyze(lower, {1, -1});
  ASSERT_TRUE(ldl.Factor(lower));
  EXPECT_GE(ldl.regularized_pivots(), 1);
  EXPECT_TRUE(ldl.d().allFinite());
}

}  // namespace
}  // namespace safelearn::conic::internal
