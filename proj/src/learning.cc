#include "safelearn/learning.h"

namespace safelearn {

std::string ToString(Verdict verdict) {
  switch (verdict) {
    case Verdict::kLearned:
      return "learned";
    case Verdict::kImpossible:
      return "impossible";
    case Verdict::kCompleted:
      return "completed";
    case Verdict::kAborted:
      return "aborted";
  }
  return "unknown";
}

StepRecord& AppendStep(LearnOutcome& outcome, const Eigen::VectorXd& c,
                       const Eigen::VectorXd& x,
                       std::vector<Eigen::VectorXd> observations,
                       std::string source) {
  StepRecord step;
  step.k = static_cast<int>(outcome.steps.size()) + 1;
  step.x = x;
  step.observations = std::move(observations);
  step.cost = c.dot(x);
  step.cumulative_cost = outcome.total_cost() + step.cost;
  step.source = std::move(source);
  outcome.steps.push_back(std::move(step));
  return outcome.steps.back();
}

}  // namespace safelearn
