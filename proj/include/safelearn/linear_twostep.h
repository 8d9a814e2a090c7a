#pragma once

// Two-step safe learning of linear dynamics under an ellipsoidal prior
// U0 = {A | q(vec A) <= 0}.

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"
#include "safelearn/conic_transforms.h"
#include "safelearn/geometry.h"
#include "safelearn/learning.h"

namespace safelearn::linear {

// x -> (A* x, A*^2 x)
using TwoStepOracle =
    std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(const Eigen::VectorXd&)>;

struct EllipsoidalUncertainty {
  int n = 0;
  conic::QuadraticForm q;  // over vec(A), row-major

  // ||A - A0||_F <= gamma
  static EllipsoidalUncertainty FrobeniusBall(const Eigen::MatrixXd& A0, double gamma);

  double Evaluate(const Eigen::MatrixXd& A) const;
  // Throws std::invalid_argument unless q has dimension n^2 and a positive
  // definite matrix part.
  void Validate() const;
};

struct Trajectory {
  Eigen::VectorXd x, y, z;  // x, A* x, A*^2 x
};

using TwoStepData = std::vector<Trajectory>;

// A = anchor + sum_i a_i basis[i].
struct AffineSubspaceParam {
  Eigen::MatrixXd anchor;
  std::vector<Eigen::MatrixXd> basis;  // Frobenius-orthonormal

  int dimension() const { return static_cast<int>(basis.size()); }
  Eigen::MatrixXd Map(const Eigen::VectorXd& a) const;
  // n^2 x dimension matrix whose columns are vec(basis[i]).
  Eigen::MatrixXd VecBasis() const;
};

struct SubspaceResult {
  bool consistent = false;
  AffineSubspaceParam param;
  double residual = 0.0;
};

// Matrices with A x_j = y_j and A y_j = z_j for every trajectory.
SubspaceResult ConsistentSubspace(const TwoStepData& data, int n,
                                  double tol = 1e-8);

// q o g for the parametrization g.
conic::QuadraticForm Restrict(const conic::QuadraticForm& q,
                              const AffineSubspaceParam& g);

struct StrictPoint {
  bool strict = false;
  Eigen::VectorXd a_bar;  // minimizer of q-hat
  double value = 0.0;     // q-hat(a_bar)
};

// Requires a positive definite matrix part.
StrictPoint CheckStrictInterior(const conic::QuadraticForm& qhat,
                                double strict_tol = 1e-9);

// Coefficients of q1(a; x) = h'g(a)x - b and q2(a; x) = h'g(a)^2 x - b as
// functions of the subspace coordinates a, for one facet (h, b) of S.
struct FacetForms {
  Eigen::MatrixXd C1;               // linear part of q1 is C1 x
  Eigen::RowVectorXd d1;            // constant part of q1 is d1 x - b
  std::vector<Eigen::MatrixXd> W;   // quadratic part of q2 is sum_b x_b W[b]
  Eigen::MatrixXd C2;               // linear part of q2 is C2 x
  Eigen::RowVectorXd d2;            // constant part of q2 is d2 x - b
  double b = 0.0;

  conic::QuadraticForm First(const Eigen::VectorXd& x) const;
  conic::QuadraticForm Second(const Eigen::VectorXd& x) const;
};

FacetForms BuildFacetForms(const AffineSubspaceParam& g, const Eigen::VectorXd& h,
                           double b);

// lambda * qhat - form
conic::QuadraticForm CertificateForm(double lambda, const conic::QuadraticForm& qhat,
                                     const conic::QuadraticForm& form);

class StrictInteriorViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TwostepSdp {
  conic::ConicProgram program;
  conic::VarRange x;
  conic::VarRange lambda1, lambda2;  // one per facet
  AffineSubspaceParam param;
  conic::QuadraticForm qhat;
  std::vector<FacetForms> facets;
};

// Throws StrictInteriorViolated when q-hat has no strictly negative point,
// and std::invalid_argument when the data admit no matrix or the subspace is
// a single point.
TwostepSdp BuildTwostepSdp(const geometry::Polyhedron& S,
                           const EllipsoidalUncertainty& U0,
                           const TwoStepData& data, const Eigen::VectorXd& c);

// min c'x over {x in S | A x in S, A^2 x in S} for a known A.
struct TwostepPoint {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd lambda1, lambda2;
  int iterations = 0;
  bool singleton = false;  // the prior collapsed to one matrix
  Eigen::MatrixXd A;       // that matrix, when singleton
};

geometry::LiftedProgram KnownTwostepRegion(const geometry::Polyhedron& S,
                                           const Eigen::MatrixXd& A);

struct TwostepSettings {
  conic::SolverSettings solver = conic::SolverSettings::Conic();
  double strict_tol = 1e-9;
  double subspace_tol = 1e-8;
  double safety_tol = 1e-6;
  int max_trajectories = -1;  // n when negative
};

TwostepPoint MinCostTwostepPoint(const geometry::Polyhedron& S,
                                 const EllipsoidalUncertainty& U0,
                                 const TwoStepData& data, const Eigen::VectorXd& c,
                                 const TwostepSettings& settings = {});

LearnOutcome LearnTwoStep(const geometry::Polyhedron& S,
                          const EllipsoidalUncertainty& U0, const Eigen::VectorXd& c,
                          const TwoStepOracle& oracle,
                          const TwostepSettings& settings = {});

struct TwostepBound {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  double value = 0.0;
  Eigen::VectorXd x;
};

// m c'x1 with x1 the cheapest two-step safe point under U0.
TwostepBound TwostepOfflineBound(const geometry::Polyhedron& S,
                                 const EllipsoidalUncertainty& U0,
                                 const Eigen::VectorXd& c, int m,
                                 const TwostepSettings& settings = {});

// m min c'x over the two-step safe region of A*.
TwostepBound TwostepLowerBound(const geometry::Polyhedron& S,
                               const Eigen::MatrixXd& A_star, const Eigen::VectorXd& c,
                               int m, const conic::SolverSettings& settings = {});

// Trajectories needed when each contributes two independent directions.
inline int DefaultTrajectoryCount(int n) { return (n + 1) / 2; }

}  // namespace safelearn::linear
