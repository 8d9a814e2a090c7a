#pragma once

// One-step safe exploration of x+ = A x + g(x) with a matrix polytope prior
// on A and ||g(x)||_inf <= gamma ||x||_p^d on S, and fitting of quadratic
// vector models to the collected data.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"
#include "safelearn/conic_transforms.h"
#include "safelearn/geometry.h"
#include "safelearn/learning.h"
#include "safelearn/linear_onestep.h"

namespace safelearn::nonlinear {

using linear::MatrixPolytope;
using linear::MeasurementSet;

struct NonlinearUncertainty {
  MatrixPolytope A;
  double gamma = 0.0;
  conic::NormOrder p = conic::NormOrder::Infinity();
  int d = 0;

  // gamma ||x||_p^d, with ||x||^0 = 1.
  double Bound(const Eigen::VectorXd& x) const;
  // Throws std::invalid_argument on negative gamma or d.
  void Validate() const;
};

// Multipliers per facet i: mu (one per prior constraint), then eta+ and eta-
// (m x n each, index k * n + l).
struct NonlinearLayout {
  int n = 0, s = 0, m = 0, r = 0;

  int per_facet() const { return s + 2 * m * n; }
  int mu(int i, int j) const { return i * per_facet() + j; }
  int eta_plus(int i, int k, int l) const { return i * per_facet() + s + k * n + l; }
  int eta_minus(int i, int k, int l) const {
    return i * per_facet() + s + m * n + k * n + l;
  }
};

// F: x-projection of the reformulated program, without the measured points.
struct NonlinearProgram {
  conic::ConicProgram program;
  conic::VarRange x;
  conic::VarRange multipliers;
  int t = -1;  // epigraph of ||x||_p^d, -1 when d = 0
  NonlinearLayout layout;
};

NonlinearProgram BuildNonlinearSocp(const geometry::Polyhedron& S,
                                    const NonlinearUncertainty& U,
                                    const MeasurementSet& data,
                                    const Eigen::VectorXd& c);

// The feasibility version of the program above.
geometry::LiftedProgram NonlinearRegion(const geometry::Polyhedron& S,
                                        const NonlinearUncertainty& U,
                                        const MeasurementSet& data);

struct NonlinearPoint {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  // -1 for a fresh point of F, otherwise the index of the measured point.
  int measured_index = -1;
  conic::SolveStatus fresh_status = conic::SolveStatus::kNumericalFailure;
};

// min c'x over F union {x_1, ..., x_k}.
NonlinearPoint MinCostNonlinearPoint(
    const geometry::Polyhedron& S, const NonlinearUncertainty& U,
    const MeasurementSet& data, const Eigen::VectorXd& c,
    const conic::SolverSettings& settings = conic::SolverSettings::Conic());

// max h'(A x + g(x)) over the data-consistent (A, g) for x outside the
// measured points, through the dual of the inner problem.
struct NonlinearWorstCase {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  double value = 0.0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd eta_plus, eta_minus;  // m x n
};

NonlinearWorstCase InnerNonlinearWorstCase(const NonlinearUncertainty& U,
                                           const MeasurementSet& data,
                                           const Eigen::VectorXd& h,
                                           const Eigen::VectorXd& x,
                                           const conic::SolverSettings& settings = {});

// Projection of conv(F union {x_k}) onto two coordinates.
geometry::Polygon NonlinearRegionPolygon(
    const geometry::Polyhedron& S, const NonlinearUncertainty& U,
    const MeasurementSet& data, std::pair<int, int> dims, int K,
    const conic::SolverSettings& settings = conic::SolverSettings::Conic());

// Step index -> cost vector.
using CostSampler = std::function<Eigen::VectorXd(int)>;

// Uniform directions on the unit sphere.
CostSampler SphereSampler(int n, std::uint64_t seed);

struct ExploreSettings {
  conic::SolverSettings solver = conic::SolverSettings::Conic();
  double safety_tol = 1e-6;
  // Directions tried per step before giving up.
  int max_resamples = 20;
  // A fresh point this close to a measured one (inf-norm) adds nothing.
  double duplicate_tol = 1e-7;
  // Called after each accepted step with the data so far.
  std::function<void(const MeasurementSet&)> on_step;
};

// kCompleted after `steps` queries.
LearnOutcome SafeExplore(const geometry::Polyhedron& S, const NonlinearUncertainty& U,
                         const CostSampler& sampler, int steps, const Oracle& oracle,
                         const ExploreSettings& settings = {});

// f(x) = A x + g(x), g_j(x) = x' G_j x.
struct QuadraticVectorModel {
  Eigen::MatrixXd A;
  std::vector<Eigen::MatrixXd> G;  // symmetric

  int dimension() const { return static_cast<int>(A.rows()); }
  Eigen::VectorXd Evaluate(const Eigen::VectorXd& x) const;
  Eigen::VectorXd Quadratic(const Eigen::VectorXd& x) const;
  double Loss(const MeasurementSet& data) const;

  void Write(std::ostream& out) const;
  // Throws std::runtime_error on a malformed stream.
  static QuadraticVectorModel Read(std::istream& in);
};

// Unconstrained least squares, minimum Frobenius norm over (A, G_j). Feature
// directions with relative singular value below rank_tol are dropped.
QuadraticVectorModel FitLeastSquares(const MeasurementSet& data, double rank_tol = 1e-7);

// Gram matrices over the monomials (1, x_1, ..., x_n): for output j and sign
// s, gamma + s g_j(x) = sigma_0 + sum_i sigma_i (b_i - h_i'x).
struct SosCertificate {
  // grams[j][s][i], s = 0 for +, 1 for -, i = 0..r
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> grams;

  double MinEigenvalue() const;
  // Largest coefficient mismatch of the identities.
  double IdentityResidual(const QuadraticVectorModel& model,
                          const geometry::Polyhedron& S, double gamma) const;
};

struct SosFit {
  conic::SolveStatus status = conic::SolveStatus::kNumericalFailure;
  QuadraticVectorModel model;
  SosCertificate certificate;
  double loss = 0.0;
  int iterations = 0;
};

// Least squares subject to A in the prior, ||A x_k - y_k||_inf <= gamma and
// the SOS bounds on g. Requires d = 0.
SosFit FitSosConstrained(const MeasurementSet& data, const geometry::Polyhedron& S,
                         const NonlinearUncertainty& U,
                         const conic::SolverSettings& settings = conic::SolverSettings::Conic());

double Rmse(const QuadraticVectorModel& model, const Oracle& truth,
            const std::vector<Eigen::VectorXd>& test_points);

// Uniform samples from the box lower <= x <= upper.
std::vector<Eigen::VectorXd> UniformBoxSamples(const Eigen::VectorXd& lower,
                                               const Eigen::VectorXd& upper, int count,
                                               std::uint64_t seed);

}  // namespace safelearn::nonlinear
