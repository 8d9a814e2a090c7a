#include "safelearn/linear_onestep.h"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace safelearn::linear {

using conic::AffineExpr;
using conic::SolveStatus;
using geometry::LiftedPolyhedron;
using geometry::Polyhedron;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd Vec(const MatrixXd& A) {
  VectorXd a(A.size());
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) a(i * A.cols() + j) = A(i, j);
  }
  return a;
}

MatrixXd Unvec(const VectorXd& a, int n) {
  if (a.size() != n * n) throw std::invalid_argument("Unvec: size is not n^2");
  MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = a(i * n + j);
  }
  return A;
}

MatrixPolytope MatrixPolytope::EntrywiseBox(const MatrixXd& lower,
                                            const MatrixXd& upper) {
  if (lower.rows() != lower.cols() || upper.rows() != lower.rows() ||
      upper.cols() != lower.cols()) {
    throw std::invalid_argument("EntrywiseBox: bounds must be square and equal size");
  }
  MatrixPolytope U;
  U.n = static_cast<int>(lower.rows());
  for (int i = 0; i < U.n; ++i) {
    for (int j = 0; j < U.n; ++j) {
      MatrixXd V = MatrixXd::Zero(U.n, U.n);
      V(i, j) = 1.0;
      if (std::isfinite(upper(i, j))) U.constraints.push_back({V, upper(i, j)});
      if (std::isfinite(lower(i, j))) U.constraints.push_back({-V, -lower(i, j)});
    }
  }
  return U;
}

MatrixPolytope MatrixPolytope::Bounded(int n, double bound) {
  return EntrywiseBox(MatrixXd::Constant(n, n, -bound),
                      MatrixXd::Constant(n, n, bound));
}

MatrixPolytope MatrixPolytope::Singleton(const MatrixXd& A) {
  return EntrywiseBox(A, A);
}

double MatrixPolytope::MaxViolation(const MatrixXd& A) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& con : constraints) {
    worst = std::max(worst, (con.V.array() * A.array()).sum() - con.v);
  }
  return worst;
}

void MatrixPolytope::Validate() const {
  if (n < 1) throw std::invalid_argument("MatrixPolytope: n must be positive");
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    if (constraints[j].V.rows() != n || constraints[j].V.cols() != n) {
      throw std::invalid_argument("MatrixPolytope: constraint " +
                                  std::to_string(j) + " is not n x n");
    }
  }
}

void MeasurementSet::Add(const VectorXd& xk, const VectorXd& yk) {
  if (xk.size() != yk.size()) {
    throw std::invalid_argument("MeasurementSet: x and y lengths differ");
  }
  x.push_back(xk);
  y.push_back(yk);
}

MeasurementSet MeasurementSet::Prefix(int k) const {
  MeasurementSet out;
  out.x.assign(x.begin(), x.begin() + k);
  out.y.assign(y.begin(), y.begin() + k);
  return out;
}

namespace {

void CheckData(int n, const MeasurementSet& data) {
  for (int k = 0; k < data.size(); ++k) {
    if (data.x[k].size() != n || data.y[k].size() != n) {
      throw std::invalid_argument("measurement " + std::to_string(k) +
                                  " has the wrong dimension");
    }
  }
}

}  // namespace

LiftedPolyhedron UncertaintySet(const MatrixPolytope& U0,
                                const MeasurementSet& data) {
  U0.Validate();
  const int n = U0.n, nn = n * n, s = static_cast<int>(U0.constraints.size());
  CheckData(n, data);
  MatrixXd A(s, nn);
  VectorXd c(s);
  for (int j = 0; j < s; ++j) {
    A.row(j) = Vec(U0.constraints[j].V).transpose();
    c(j) = U0.constraints[j].v;
  }
  LiftedPolyhedron U(A, MatrixXd(s, 0), c);
  const int m = data.size();
  MatrixXd Aeq = MatrixXd::Zero(m * n, nn);
  VectorXd ceq(m * n);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < n; ++l) {
      Aeq.row(k * n + l).segment(l * n, n) = data.x[k].transpose();
      ceq(k * n + l) = data.y[k](l);
    }
  }
  U.AddEqualities(Aeq, MatrixXd(m * n, 0), ceq);
  return U;
}

LiftedPolyhedron OnestepRegion(const Polyhedron& S, const MatrixPolytope& U0,
                               const MeasurementSet& data, OnestepLayout* layout) {
  U0.Validate();
  const int n = U0.n;
  if (S.dimension() != n) {
    throw std::invalid_argument("OnestepRegion: S and U0 dimensions differ");
  }
  CheckData(n, data);
  OnestepLayout lay{n, static_cast<int>(U0.constraints.size()), data.size(),
                    S.num_halfspaces()};
  const int L = lay.size();
  const int rows = lay.r + lay.r + lay.r * lay.s;
  MatrixXd A = MatrixXd::Zero(rows, n), B = MatrixXd::Zero(rows, L);
  VectorXd c = VectorXd::Zero(rows);
  A.topRows(lay.r) = S.H();
  c.head(lay.r) = S.b();
  for (int i = 0; i < lay.r; ++i) {
    const int row = lay.r + i;
    for (int j = 0; j < lay.s; ++j) B(row, lay.mu(i, j)) = U0.constraints[j].v;
    for (int k = 0; k < lay.m; ++k) {
      for (int b = 0; b < n; ++b) B(row, lay.eta(i, k, b)) = data.y[k](b);
    }
    c(row) = S.b()(i);
    for (int j = 0; j < lay.s; ++j) {
      B(2 * lay.r + i * lay.s + j, lay.mu(i, j)) = -1.0;
    }
  }
  LiftedPolyhedron P(A, B, c);
  // x h_i' = sum_j mu_j V_j' + sum_k x_k eta_k', entry (a, b).
  MatrixXd Aeq = MatrixXd::Zero(lay.r * n * n, n), Beq = MatrixXd::Zero(lay.r * n * n, L);
  for (int i = 0; i < lay.r; ++i) {
    const VectorXd h = S.H().row(i).transpose();
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const int row = (i * n + a) * n + b;
        Aeq(row, a) = h(b);
        for (int j = 0; j < lay.s; ++j) {
          Beq(row, lay.mu(i, j)) = -U0.constraints[j].V(b, a);
        }
        for (int k = 0; k < lay.m; ++k) Beq(row, lay.eta(i, k, b)) = -data.x[k](a);
      }
    }
  }
  P.AddEqualities(Aeq, Beq, VectorXd::Zero(Aeq.rows()));
  if (layout != nullptr) *layout = lay;
  return P;
}

OnestepLp BuildOnestepLp(const Polyhedron& S, const MatrixPolytope& U0,
                         const MeasurementSet& data, const VectorXd& c) {
  if (c.size() != U0.n) throw std::invalid_argument("BuildOnestepLp: bad cost length");
  OnestepLp lp;
  geometry::LiftedProgram prog = geometry::ToProgram(OnestepRegion(S, U0, data, &lp.layout));
  lp.program = std::move(prog.program);
  lp.x = prog.x;
  lp.multipliers = {prog.x.start + prog.x.size, lp.layout.size()};
  lp.program.SetObjective(AffineExpr::Dot(c, lp.x), conic::Sense::kMinimize);
  return lp;
}

SafePoint MinCostSafePoint(const Polyhedron& S, const MatrixPolytope& U0,
                           const MeasurementSet& data, const VectorXd& c,
                           const conic::SolverSettings& settings) {
  const OnestepLp lp = BuildOnestepLp(S, U0, data, c);
  const conic::Solution sol = conic::Solve(lp.program, settings);
  SafePoint out;
  out.status = sol.status;
  out.iterations = sol.stats.iterations;
  if (sol.optimal()) {
    out.x = sol.Value(lp.x);
    out.value = sol.objective_value;
  }
  return out;
}

Polyhedron DisturbanceTighten(const Polyhedron& S, double W, NormBall ball) {
  if (!(W >= 0.0)) throw std::invalid_argument("DisturbanceTighten: W must be >= 0");
  VectorXd b = S.b();
  for (int i = 0; i < S.num_halfspaces(); ++i) {
    const auto h = S.H().row(i);
    const double support =
        ball == NormBall::kInfinity ? h.lpNorm<1>() : h.lpNorm<Eigen::Infinity>();
    b(i) -= W * support;
  }
  return Polyhedron(S.H(), b);
}

WorstCase InnerWorstCase(const MatrixPolytope& U0, const MeasurementSet& data,
                         const VectorXd& h, const VectorXd& x,
                         const conic::SolverSettings& settings) {
  U0.Validate();
  const int n = U0.n, s = static_cast<int>(U0.constraints.size()), m = data.size();
  if (h.size() != n || x.size() != n) {
    throw std::invalid_argument("InnerWorstCase: dimension mismatch");
  }
  CheckData(n, data);
  conic::ConicProgram prog;
  const conic::VarRange mu = prog.AddVariables(s, "mu");
  const conic::VarRange eta = prog.AddVariables(m * n, "eta");
  AffineExpr objective;
  std::vector<AffineExpr> nonneg;
  for (int j = 0; j < s; ++j) {
    objective.AddTerm(mu[j], U0.constraints[j].v);
    nonneg.push_back(AffineExpr::Var(mu[j]));
  }
  for (int k = 0; k < m; ++k) {
    for (int b = 0; b < n; ++b) objective.AddTerm(eta[k * n + b], data.y[k](b));
  }
  std::vector<AffineExpr> eqs;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      AffineExpr e(-x(a) * h(b));
      for (int j = 0; j < s; ++j) {
        const double coeff = U0.constraints[j].V(b, a);
        if (coeff != 0.0) e.AddTerm(mu[j], coeff);
      }
      for (int k = 0; k < m; ++k) {
        if (data.x[k](a) != 0.0) e.AddTerm(eta[k * n + b], data.x[k](a));
      }
      eqs.push_back(std::move(e));
    }
  }
  if (!nonneg.empty()) prog.AddNonnegative(std::move(nonneg), "mu");
  prog.AddEquality(std::move(eqs), "stationarity");
  prog.SetObjective(objective, conic::Sense::kMinimize);
  const conic::Solution sol = conic::Solve(prog, settings);
  WorstCase out;
  out.status = sol.status;
  if (sol.optimal()) {
    out.value = sol.objective_value;
    out.mu = sol.Value(mu);
    out.eta = MatrixXd(m, n);
    for (int k = 0; k < m; ++k) {
      out.eta.row(k) = sol.Value(eta).segment(k * n, n).transpose();
    }
  }
  return out;
}

MatrixXd RecoverMatrix(const MeasurementSet& data, double* condition) {
  const int n = data.size();
  if (n == 0) throw std::invalid_argument("RecoverMatrix: no data");
  CheckData(static_cast<int>(data.x.front().size()), data);
  MatrixXd X(n, n), Y(n, n);
  for (int k = 0; k < n; ++k) {
    X.col(k) = data.x[k];
    Y.col(k) = data.y[k];
  }
  if (condition != nullptr) {
    Eigen::JacobiSVD<MatrixXd> svd(X);
    const VectorXd sv = svd.singularValues();
    *condition = sv(n - 1) > 0 ? sv(0) / sv(n - 1)
                               : std::numeric_limits<double>::infinity();
  }
  return X.transpose().colPivHouseholderQr().solve(Y.transpose()).transpose();
}

namespace {

std::string VectorText(const VectorXd& v) {
  std::ostringstream out;
  out << v.transpose();
  return out.str();
}

// Observes y = A* x and checks both states against S. Returns false and sets
// the outcome message on a violation.
bool Query(const Polyhedron& S, const Oracle& oracle, const VectorXd& x,
           double tol, VectorXd& y, LearnOutcome& outcome) {
  if (!geometry::Contains(S, x, tol)) {
    outcome.verdict = Verdict::kAborted;
    outcome.message = "query outside the safety region: " + VectorText(x);
    return false;
  }
  y = oracle(x);
  if (y.size() != x.size()) {
    throw std::invalid_argument("oracle returned a vector of length " +
                                std::to_string(y.size()));
  }
  if (!geometry::Contains(S, y, tol)) {
    outcome.verdict = Verdict::kAborted;
    outcome.message = "safety violation: observation " + VectorText(y) +
                      " leaves the safety region";
    return false;
  }
  return true;
}

void Finalize(const MeasurementSet& data, const OnestepSettings& settings,
              LearnOutcome& outcome) {
  double condition = 0.0;
  outcome.A = RecoverMatrix(data, &condition);
  if (condition > settings.condition_warning) {
    std::ostringstream msg;
    msg << "measurement matrix is ill conditioned (cond " << condition << ")";
    outcome.warnings.push_back(msg.str());
  }
  outcome.verdict = Verdict::kLearned;
  outcome.measurements_used = data.size();
}

}  // namespace

LearnOutcome LearnOnline(const Polyhedron& S, const MatrixPolytope& U0,
                         const VectorXd& c, const Oracle& oracle,
                         const OnestepSettings& settings) {
  if (!(settings.epsilon > 0.0 && settings.epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0, 1]");
  }
  U0.Validate();
  const int n = U0.n;
  if (S.dimension() != n || c.size() != n) {
    throw std::invalid_argument("LearnOnline: dimension mismatch");
  }
  const auto& gs = settings.geometry;
  LearnOutcome outcome;
  MeasurementSet data;
  geometry::BasisSet queries(n, gs.rank_tol);
  for (int k = 0; k < n; ++k) {
    const geometry::SingletonResult single =
        geometry::IsSingleton(UncertaintySet(U0, data), gs.singleton_tol, gs.solver);
    if (single.status == geometry::SingletonStatus::kSingleton) {
      outcome.verdict = Verdict::kLearned;
      outcome.A = Unvec(single.point, n);
      outcome.measurements_used = k;
      return outcome;
    }
    if (single.status != geometry::SingletonStatus::kNotSingleton) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = single.status == geometry::SingletonStatus::kEmpty
                            ? "observations are inconsistent with the prior"
                            : "singleton test failed";
      return outcome;
    }
    const SafePoint best = MinCostSafePoint(S, U0, data, c, gs.solver);
    if (best.status == SolveStatus::kInfeasible) {
      outcome.verdict = Verdict::kImpossible;
      outcome.message = "no one-step safe query exists";
      return outcome;
    }
    if (best.status != SolveStatus::kOptimal) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "one-step LP: " + conic::ToString(best.status);
      return outcome;
    }
    VectorXd x_next;
    std::string source;
    if (geometry::IndependentOf(best.x, queries)) {
      x_next = best.x;
      source = "optimal";
    } else {
      geometry::SpanBasisResult span;
      try {
        span = geometry::SpanBasis(OnestepRegion(S, U0, data), gs);
      } catch (const std::runtime_error& e) {
        outcome.verdict = Verdict::kAborted;
        outcome.message = e.what();
        return outcome;
      }
      for (const VectorXd& z : span.basis.vectors()) {
        if (geometry::IndependentOf(z, queries)) {
          x_next = (1.0 - settings.epsilon) * best.x + settings.epsilon * z;
          source = "blend";
          break;
        }
      }
      if (x_next.size() == 0) {
        outcome.verdict = Verdict::kImpossible;
        std::ostringstream msg;
        msg << "the safe region spans only " << span.basis.size()
            << " dimensions after " << k << " measurements";
        outcome.message = msg.str();
        return outcome;
      }
    }
    VectorXd y;
    if (!Query(S, oracle, x_next, settings.safety_tol, y, outcome)) return outcome;
    StepRecord& step = AppendStep(outcome, c, x_next, {y}, source);
    step.uncertainty_width = single.max_width();
    step.solver_iterations = best.iterations;
    data.Add(x_next, y);
    queries.TryAdd(x_next);
    outcome.measurements_used = data.size();
  }
  Finalize(data, settings, outcome);
  return outcome;
}

LearnOutcome LearnOffline(const Polyhedron& S, const MatrixPolytope& U0,
                          const VectorXd& c, const Oracle& oracle,
                          const OnestepSettings& settings) {
  if (!(settings.epsilon > 0.0 && settings.epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0, 1]");
  }
  U0.Validate();
  const int n = U0.n;
  if (S.dimension() != n || c.size() != n) {
    throw std::invalid_argument("LearnOffline: dimension mismatch");
  }
  LearnOutcome outcome;
  const MeasurementSet none;
  geometry::SpanBasisResult span;
  try {
    span = geometry::SpanBasis(OnestepRegion(S, U0, none), settings.geometry);
  } catch (const std::runtime_error& e) {
    outcome.message = e.what();
    return outcome;
  }
  if (span.basis.size() < n) {
    outcome.verdict = Verdict::kImpossible;
    outcome.message = "the initial safe region does not contain a basis";
    return outcome;
  }
  const SafePoint best = MinCostSafePoint(S, U0, none, c, settings.geometry.solver);
  if (best.status != SolveStatus::kOptimal) {
    outcome.message = "one-step LP: " + conic::ToString(best.status);
    return outcome;
  }
  MeasurementSet data;
  geometry::BasisSet queries(n, settings.geometry.rank_tol);
  for (int k = 0; k < n; ++k) {
    const VectorXd x =
        (1.0 - settings.epsilon) * best.x + settings.epsilon * span.basis[k];
    VectorXd y;
    if (!Query(S, oracle, x, settings.safety_tol, y, outcome)) return outcome;
    AppendStep(outcome, c, x, {y}, "offline");
    data.Add(x, y);
    queries.TryAdd(x);
  }
  if (queries.size() < n) {
    outcome.verdict = Verdict::kAborted;
    outcome.message = "offline queries are linearly dependent";
    outcome.measurements_used = data.size();
    return outcome;
  }
  Finalize(data, settings, outcome);
  return outcome;
}

CostBound OfflineUpperBound(const Polyhedron& S, const MatrixPolytope& U0,
                            const VectorXd& c, const conic::SolverSettings& settings) {
  const SafePoint best = MinCostSafePoint(S, U0, MeasurementSet(), c, settings);
  CostBound out;
  out.status = best.status;
  if (best.status == SolveStatus::kOptimal) {
    out.x = best.x;
    out.value = U0.n * best.value;
  }
  return out;
}

CostBound CostLowerBound(const Polyhedron& S, const MatrixXd& A_star,
                         const VectorXd& c, int n_measurements,
                         const conic::SolverSettings& settings) {
  const int n = S.dimension();
  if (A_star.rows() != n || A_star.cols() != n || c.size() != n) {
    throw std::invalid_argument("CostLowerBound: dimension mismatch");
  }
  MatrixXd H(2 * S.num_halfspaces(), n);
  H << S.H(), S.H() * A_star;
  VectorXd b(2 * S.num_halfspaces());
  b << S.b(), S.b();
  geometry::LiftedProgram lp = geometry::ToProgram(
      LiftedPolyhedron(H, MatrixXd(H.rows(), 0), b));
  lp.program.SetObjective(AffineExpr::Dot(c, lp.x), conic::Sense::kMinimize);
  const conic::Solution sol = conic::Solve(lp.program, settings);
  CostBound out;
  out.status = sol.status;
  if (sol.optimal()) {
    out.x = sol.Value(lp.x);
    out.value = n_measurements * sol.objective_value;
  }
  return out;
}

}  // namespace safelearn::linear
