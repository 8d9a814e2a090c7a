#pragma once

// Experiment description shared by the harness and the command-line tool,
// stored as a JSON document. Matrices are nested arrays, one inner array per
// row.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"
#include "safelearn/conic_transforms.h"
#include "safelearn/geometry.h"
#include "safelearn/linear_onestep.h"
#include "safelearn/linear_twostep.h"
#include "safelearn/nonlinear_onestep.h"

namespace safelearn {

enum class Mode { kLinear1, kLinear2, kNonlinear1 };

std::string ToString(Mode mode);

// Malformed or inconsistent configuration; line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        message_(message),
        line_(line) {}
  int line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  int line_;
};

struct PriorSpec {
  enum class Kind { kBounded, kBox, kConstraints, kFrobeniusBall, kEllipsoid };
  Kind kind = Kind::kBounded;
  double bound = 0.0;                             // kBounded
  Eigen::MatrixXd lower, upper;                   // kBox
  std::vector<linear::MatrixConstraint> constraints;  // kConstraints
  Eigen::MatrixXd center;                         // kFrobeniusBall
  double radius = 0.0;
  conic::QuadraticForm form;                      // kEllipsoid, over vec(A)

  bool polytope() const {
    return kind == Kind::kBounded || kind == Kind::kBox || kind == Kind::kConstraints;
  }
};

struct ExperimentConfig {
  std::string name;
  Mode mode = Mode::kLinear1;
  int n = 0;
  geometry::Polyhedron safety;
  PriorSpec prior;

  // Nonlinear bound ||g(x)||_inf <= gamma ||x||_p^d.
  double gamma = 0.0;
  conic::NormOrder p = conic::NormOrder::Infinity();
  int d = 0;

  // Fixed cost vector, or uniform unit directions when sphere_cost is set.
  Eigen::VectorXd c;
  bool sphere_cost = false;
  double epsilon = 0.01;

  Eigen::MatrixXd A_star;
  std::vector<std::string> g_star;          // one expression per coordinate
  std::map<std::string, double> constants;  // names usable in g_star

  std::uint64_t explore_seed = 0;
  std::uint64_t test_seed = 0;
  int steps = 30;
  int max_trajectories = -1;
  bool offline = false;

  int directions = 128;
  std::pair<int, int> dims{0, 1};
  bool snapshots = true;

  bool validate_g = true;
  int validation_samples = 10000;
  int fit_train = 8;
  int fit_test = 1000;

  // Zero selects the default for the mode.
  double feas_tol = 0.0;
  double gap_tol = 0.0;
  double safety_tol = 1e-6;

  bool operator==(const ExperimentConfig& other) const;

  conic::SolverSettings Solver() const;
  linear::MatrixPolytope PolytopePrior() const;
  linear::EllipsoidalUncertainty EllipsoidPrior() const;
  nonlinear::NonlinearUncertainty Nonlinear() const;

  // Throws ConfigError (line 0) when fields disagree in dimension or mode.
  void Validate() const;
};

// Throws ConfigError with the line of the offending token or key.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::string& path);

// Fully resolved form: defaults filled in, safety region as H and b.
std::string SerializeConfig(const ExperimentConfig& config);

// 16 hex digits (FNV-1a over the serialized config).
std::string ConfigDigest(const ExperimentConfig& config);

}  // namespace safelearn
