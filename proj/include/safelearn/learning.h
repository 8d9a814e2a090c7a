#pragma once

// Records shared by the learners.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace safelearn {

// x -> A* x (+ g*(x)).
using Oracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

enum class Verdict {
  kLearned,     // the true dynamics were recovered
  kImpossible,  // safe learning cannot succeed from this prior
  kCompleted,   // exploration ran its full budget
  kAborted,     // solver failure or safety violation
};

std::string ToString(Verdict verdict);

struct StepRecord {
  int k = 0;                                  // 1-based query index
  Eigen::VectorXd x;                          // query
  std::vector<Eigen::VectorXd> observations;  // successors of x
  double cost = 0.0;
  double cumulative_cost = 0.0;
  // Largest coordinate width of the uncertainty set before the query, NaN
  // when not computed.
  double uncertainty_width = std::numeric_limits<double>::quiet_NaN();
  std::string source;  // how the query was chosen
  Eigen::VectorXd cost_direction;  // sampled cost vector, when random
  int solver_iterations = 0;
  std::vector<double> certificate;  // multipliers logged for audit
};

struct LearnOutcome {
  Verdict verdict = Verdict::kAborted;
  Eigen::MatrixXd A;  // recovered matrix when kLearned
  int measurements_used = 0;
  std::vector<StepRecord> steps;
  std::string message;
  std::vector<std::string> warnings;

  double total_cost() const {
    return steps.empty() ? 0.0 : steps.back().cumulative_cost;
  }
};

// Appends a step with cost c'x and the running total.
StepRecord& AppendStep(LearnOutcome& outcome, const Eigen::VectorXd& c,
                       const Eigen::VectorXd& x,
                       std::vector<Eigen::VectorXd> observations,
                       std::string source);

}  // namespace safelearn
