#pragma once

// Experiment scaffolding around the learners: the hidden system, safety
// audit, region and uncertainty snapshots, and the on-disk run log.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/config.h"
#include "safelearn/expression.h"
#include "safelearn/geometry.h"
#include "safelearn/learning.h"
#include "safelearn/linear_onestep.h"
#include "safelearn/linear_twostep.h"
#include "safelearn/nonlinear_onestep.h"

namespace safelearn::harness {

struct TrueSystem {
  Eigen::MatrixXd A_star;
  VectorExpression g_star;  // empty for a linear system

  static TrueSystem FromConfig(const ExperimentConfig& config);
  int dimension() const { return static_cast<int>(A_star.rows()); }
  Eigen::VectorXd Step(const Eigen::VectorXd& x) const;
};

struct Observation {
  Eigen::VectorXd y;
  Eigen::VectorXd z;  // empty for horizon 1
};

// Throws std::invalid_argument on a length mismatch or a horizon outside {1, 2}.
Observation Observe(const TrueSystem& sys, const Eigen::VectorXd& x, int horizon);

// Uniform samples from a bounded polyhedron: bounding box from support LPs,
// then rejection. Throws std::runtime_error if S is empty or unbounded.
std::vector<Eigen::VectorXd> SamplePolyhedron(const geometry::Polyhedron& S, int count,
                                              std::uint64_t seed);

struct NonlinearityCheck {
  bool pass = true;
  int samples = 0;
  // Largest ||g(x)||_inf - gamma ||x||_p^d over the samples.
  double worst_excess = 0.0;
  Eigen::VectorXd worst_x;
};

NonlinearityCheck CheckNonlinearity(const TrueSystem& sys,
                                    const nonlinear::NonlinearUncertainty& U,
                                    const geometry::Polyhedron& S, int samples,
                                    std::uint64_t seed, double tol = 1e-9);

struct AuditReport {
  bool pass = true;
  int states = 0;
  // Smallest b_i - h_i'x over all states; positive means strictly inside.
  double worst_margin = 0.0;
  double violation = 0.0;  // max(0, -worst_margin)
  int worst_step = 0;      // 1-based step holding the worst state
  Eigen::VectorXd worst_state;
};

// Checks queries and every observed successor.
AuditReport Audit(const LearnOutcome& log, const geometry::Polyhedron& S,
                  double tol = 1e-6);
AuditReport AuditStates(const std::vector<Eigen::VectorXd>& states,
                        const geometry::Polyhedron& S, double tol = 1e-6);

// 2 x n^2 map vec(A) -> (trace, entry sum).
Eigen::MatrixXd TraceSumMap(int n);

// Images of the uncertainty set under TraceSumMap.
geometry::Polygon PolytopeUncertaintySnapshot(const linear::MatrixPolytope& U0,
                                              const linear::MeasurementSet& data, int K,
                                              const conic::SolverSettings& settings = {});
// {A in U0 | ||A x_k - y_k||_inf <= gamma ||x_k||_p^d}
geometry::Polygon NonlinearUncertaintySnapshot(const nonlinear::NonlinearUncertainty& U,
                                               const linear::MeasurementSet& data, int K,
                                               const conic::SolverSettings& settings = {});
// One second-order cone program per direction over the consistent subspace.
geometry::Polygon EllipsoidUncertaintySnapshot(
    const linear::EllipsoidalUncertainty& U0, const linear::TwoStepData& data, int K,
    const conic::SolverSettings& settings = conic::SolverSettings::Conic());

struct Snapshot {
  int step = 0;  // measurements taken into account
  geometry::Polygon polygon;
};

struct Bounds {
  std::optional<double> offline_upper;   // n c'x0* (two-step: m c'x1)
  std::optional<double> offline_cost;    // realized by the offline learner
  std::optional<double> lower;           // A*-informed
};

struct RunLog {
  ExperimentConfig config;
  std::string digest;
  LearnOutcome outcome;
  Bounds bounds;
  AuditReport audit;
  std::optional<NonlinearityCheck> nonlinearity;
  std::vector<Snapshot> regions;
  std::vector<Snapshot> uncertainty;
};

// Learner failure, with everything logged before it.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, RunLog log)
      : std::runtime_error(what), log_(std::move(log)) {}
  const RunLog& log() const { return log_; }

 private:
  RunLog log_;
};

// Dispatches on config.mode with the configured system as oracle.
RunLog Run(const ExperimentConfig& config);

// Safe region polygon after the first k logged measurements.
geometry::Polygon RegionSnapshot(const ExperimentConfig& config, const LearnOutcome& outcome,
                                 int k);

// Directory layout: summary.json, steps.csv, regions/step_k.csv,
// uncertainty/step_k.csv.
void WriteRunLog(const RunLog& log, const std::filesystem::path& dir);

struct LoggedSteps {
  std::vector<Eigen::VectorXd> x;
  std::vector<std::vector<Eigen::VectorXd>> observations;
  std::vector<double> cost;
};

// Reads steps.csv. Throws std::runtime_error on a malformed file.
LoggedSteps ReadSteps(const std::filesystem::path& steps_csv);

struct FitReport {
  nonlinear::QuadraticVectorModel least_squares;
  nonlinear::SosFit sos;
  double rmse_least_squares = 0.0;
  double rmse_sos = 0.0;
  int train = 0;
  int test = 0;
};

// Fits both models on the first config.fit_train points of data and scores
// them on config.fit_test uniform samples of S drawn with config.test_seed.
FitReport RunFit(const ExperimentConfig& config, const linear::MeasurementSet& data);

}  // namespace safelearn::harness
