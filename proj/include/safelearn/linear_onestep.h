#pragma once

// One-step safe learning of linear dynamics x+ = A x under a matrix polytope
// prior.

#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"
#include "safelearn/geometry.h"
#include "safelearn/learning.h"

namespace safelearn::linear {

// Matrices are flattened row-major: a[i * n + j] = A(i, j).
Eigen::VectorXd Vec(const Eigen::MatrixXd& A);
Eigen::MatrixXd Unvec(const Eigen::VectorXd& a, int n);

// Tr(V' A) <= v
struct MatrixConstraint {
  Eigen::MatrixXd V;
  double v = 0.0;
};

struct MatrixPolytope {
  int n = 0;
  std::vector<MatrixConstraint> constraints;

  // lower(i,j) <= A(i,j) <= upper(i,j); infinite bounds are dropped.
  static MatrixPolytope EntrywiseBox(const Eigen::MatrixXd& lower,
                                     const Eigen::MatrixXd& upper);
  // |A(i,j)| <= bound
  static MatrixPolytope Bounded(int n, double bound);
  static MatrixPolytope Singleton(const Eigen::MatrixXd& A);

  double MaxViolation(const Eigen::MatrixXd& A) const;
  // Throws std::invalid_argument on a shape mismatch.
  void Validate() const;
};

struct MeasurementSet {
  std::vector<Eigen::VectorXd> x, y;

  int size() const { return static_cast<int>(x.size()); }
  void Add(const Eigen::VectorXd& xk, const Eigen::VectorXd& yk);
  MeasurementSet Prefix(int k) const;
};

// U_k = {A in U0 | A x_j = y_j} over vec(A), with no lifted coordinates.
geometry::LiftedPolyhedron UncertaintySet(const MatrixPolytope& U0,
                                          const MeasurementSet& data);

// Position of the multipliers among the lifted coordinates of the one-step
// region: for each facet i, mu (one per U0 constraint) then eta (one row of
// length n per measurement).
struct OnestepLayout {
  int n = 0, s = 0, m = 0, r = 0;

  int per_facet() const { return s + m * n; }
  int size() const { return r * per_facet(); }
  int mu(int i, int j) const { return i * per_facet() + j; }
  int eta(int i, int k, int b) const { return i * per_facet() + s + k * n + b; }
};

// S^1_k as a lifted polyhedron over x with the dual multipliers as lifted
// coordinates.
geometry::LiftedPolyhedron OnestepRegion(const geometry::Polyhedron& S,
                                         const MatrixPolytope& U0,
                                         const MeasurementSet& data,
                                         OnestepLayout* layout = nullptr);

struct OnestepLp {
  conic::ConicProgram program;
  conic::VarRange x;
  conic::VarRange multipliers;
  OnestepLayout layout;
};

// min c'x over S^1_k.
OnestepLp BuildOnestepLp(const geometry::Polyhedron& S, const MatrixPolytope& U0,
                         const MeasurementSet& data, const Eigen::VectorXd& c);

struct SafePoint {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

SafePoint MinCostSafePoint(const geometry::Polyhedron& S, const MatrixPolytope& U0,
                           const MeasurementSet& data, const Eigen::VectorXd& c,
                           const conic::SolverSettings& settings = {});

enum class NormBall { kInfinity, kOne };

// Shrinks b_i by W times the support of the ball along h_i.
geometry::Polyhedron DisturbanceTighten(const geometry::Polyhedron& S, double W,
                                        NormBall ball);

// max h'A x over U_k, computed through the dual LP.
struct WorstCase {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  double value = 0.0;
  Eigen::VectorXd mu;   // one per U0 constraint
  Eigen::MatrixXd eta;  // one row per measurement
};

WorstCase InnerWorstCase(const MatrixPolytope& U0, const MeasurementSet& data,
                         const Eigen::VectorXd& h, const Eigen::VectorXd& x,
                         const conic::SolverSettings& settings = {});

struct OnestepSettings {
  double epsilon = 0.01;
  geometry::GeometrySettings geometry;
  // Tolerance for the membership audit of queries and observations.
  double safety_tol = 1e-6;
  double condition_warning = 1e8;
};

LearnOutcome LearnOnline(const geometry::Polyhedron& S, const MatrixPolytope& U0,
                         const Eigen::VectorXd& c, const Oracle& oracle,
                         const OnestepSettings& settings = {});

LearnOutcome LearnOffline(const geometry::Polyhedron& S, const MatrixPolytope& U0,
                          const Eigen::VectorXd& c, const Oracle& oracle,
                          const OnestepSettings& settings = {});

struct CostBound {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  double value = 0.0;  // per-point optimum times the measurement count
  Eigen::VectorXd x;   // per-point minimizer
};

// n c'x0*, the small-epsilon limit of the offline cost.
CostBound OfflineUpperBound(const geometry::Polyhedron& S,
                            const MatrixPolytope& U0, const Eigen::VectorXd& c,
                            const conic::SolverSettings& settings = {});

// n_measurements * min c'x over {x in S | A* x in S}.
CostBound CostLowerBound(const geometry::Polyhedron& S,
                         const Eigen::MatrixXd& A_star, const Eigen::VectorXd& c,
                         int n_measurements,
                         const conic::SolverSettings& settings = {});

// Y X^-1 from n measurements with independent x_k.
Eigen::MatrixXd RecoverMatrix(const MeasurementSet& data, double* condition = nullptr);

}  // namespace safelearn::linear
