#include "safelearn/harness.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace safelearn::harness {

using conic::AffineExpr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using geometry::Polygon;
using geometry::Polyhedron;
using geometry::SupportResult;
using geometry::SupportStatus;
using linear::MeasurementSet;
using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MeasurementSet PrefixData(const LearnOutcome& outcome, int k) {
  MeasurementSet data;
  for (int j = 0; j < k; ++j) data.Add(outcome.steps[j].x, outcome.steps[j].observations[0]);
  return data;
}

linear::TwoStepData PrefixTrajectories(const LearnOutcome& outcome, int k) {
  linear::TwoStepData data;
  for (int j = 0; j < k; ++j) {
    const StepRecord& s = outcome.steps[j];
    data.push_back({s.x, s.observations[0], s.observations[1]});
  }
  return data;
}

MatrixXd Selector(int n, std::pair<int, int> dims) {
  MatrixXd F = MatrixXd::Zero(2, n);
  F(0, dims.first) = 1.0;
  F(1, dims.second) = 1.0;
  return F;
}

SupportResult PointSupport(const Eigen::Vector2d& w, const Eigen::Vector2d& p) {
  SupportResult r;
  r.status = SupportStatus::kBounded;
  r.value = w.dot(p);
  r.point = p;
  return r;
}

json Number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return v;
}

json VectorJson(const VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(Number(v(i)));
  return out;
}

json MatrixJson(const MatrixXd& M) {
  json out = json::array();
  for (int i = 0; i < M.rows(); ++i) out.push_back(VectorJson(M.row(i).transpose()));
  return out;
}

json Optional(const std::optional<double>& v) { return v ? Number(*v) : json(nullptr); }

}  // namespace

TrueSystem TrueSystem::FromConfig(const ExperimentConfig& config) {
  TrueSystem sys;
  sys.A_star = config.A_star;
  if (!config.g_star.empty()) {
    sys.g_star = VectorExpression::Parse(config.g_star, config.n, config.constants);
  }
  return sys;
}

VectorXd TrueSystem::Step(const VectorXd& x) const {
  VectorXd y = A_star * x;
  if (!g_star.empty()) y += g_star.Evaluate(x);
  return y;
}

Observation Observe(const TrueSystem& sys, const VectorXd& x, int horizon) {
  if (x.size() != sys.dimension()) throw std::invalid_argument("Observe: wrong state length");
  if (horizon != 1 && horizon != 2) throw std::invalid_argument("Observe: horizon must be 1 or 2");
  Observation obs;
  obs.y = sys.Step(x);
  if (horizon == 2) obs.z = sys.Step(obs.y);
  return obs;
}

std::vector<VectorXd> SamplePolyhedron(const Polyhedron& S, int count, std::uint64_t seed) {
  const int n = S.dimension();
  const auto P = geometry::LiftedPolyhedron::FromPolyhedron(S);
  VectorXd lower(n), upper(n);
  for (int i = 0; i < n; ++i) {
    const SupportResult hi = geometry::Support(P, VectorXd::Unit(n, i));
    const SupportResult lo = geometry::Support(P, -VectorXd::Unit(n, i));
    if (hi.status != SupportStatus::kBounded || lo.status != SupportStatus::kBounded) {
      throw std::runtime_error("SamplePolyhedron: region is empty or unbounded");
    }
    upper(i) = hi.value;
    lower(i) = -lo.value;
  }
  std::vector<VectorXd> out;
  for (int batch = 0; static_cast<int>(out.size()) < count; ++batch) {
    if (batch == 1000) throw std::runtime_error("SamplePolyhedron: acceptance rate too low");
    for (VectorXd& x : nonlinear::UniformBoxSamples(lower, upper, count, seed + batch)) {
      if (static_cast<int>(out.size()) < count && S.MaxViolation(x) <= 0.0) {
        out.push_back(std::move(x));
      }
    }
  }
  return out;
}

NonlinearityCheck CheckNonlinearity(const TrueSystem& sys,
                                    const nonlinear::NonlinearUncertainty& U,
                                    const Polyhedron& S, int samples, std::uint64_t seed,
                                    double tol) {
  NonlinearityCheck check;
  check.worst_excess = -kInf;
  for (const VectorXd& x : SamplePolyhedron(S, samples, seed)) {
    const VectorXd g =
        sys.g_star.empty() ? VectorXd::Zero(x.size()) : sys.g_star.Evaluate(x);
    const double excess = g.lpNorm<Eigen::Infinity>() - U.Bound(x);
    ++check.samples;
    if (!(excess <= check.worst_excess)) {
      check.worst_excess = excess;
      check.worst_x = x;
    }
  }
  check.pass = check.worst_excess <= tol;
  return check;
}

AuditReport AuditStates(const std::vector<VectorXd>& states, const Polyhedron& S,
                        double tol) {
  AuditReport report;
  report.worst_margin = kInf;
  for (size_t k = 0; k < states.size(); ++k) {
    const double margin = -S.MaxViolation(states[k]);
    ++report.states;
    if (!(margin >= report.worst_margin)) {
      report.worst_margin = margin;
      report.worst_state = states[k];
      report.worst_step = static_cast<int>(k) + 1;
    }
  }
  report.violation = std::max(0.0, -report.worst_margin);
  report.pass = report.worst_margin >= -tol;
  return report;
}

AuditReport Audit(const LearnOutcome& log, const Polyhedron& S, double tol) {
  std::vector<VectorXd> states;
  std::vector<int> step_of;
  for (const StepRecord& step : log.steps) {
    states.push_back(step.x);
    step_of.push_back(step.k);
    for (const VectorXd& y : step.observations) {
      states.push_back(y);
      step_of.push_back(step.k);
    }
  }
  AuditReport report = AuditStates(states, S, tol);
  if (report.worst_step > 0) report.worst_step = step_of[report.worst_step - 1];
  return report;
}

MatrixXd TraceSumMap(int n) {
  MatrixXd F(2, n * n);
  F.row(0) = linear::Vec(MatrixXd::Identity(n, n)).transpose();
  F.row(1).setOnes();
  return F;
}

Polygon PolytopeUncertaintySnapshot(const linear::MatrixPolytope& U0, const MeasurementSet& data,
                                    int K, const conic::SolverSettings& settings) {
  return geometry::ProjectLinear(geometry::ToProgram(linear::UncertaintySet(U0, data)),
                                 TraceSumMap(U0.n), K, settings);
}

Polygon NonlinearUncertaintySnapshot(const nonlinear::NonlinearUncertainty& U,
                                     const MeasurementSet& data, int K,
                                     const conic::SolverSettings& settings) {
  const int n = U.A.n, nn = n * n;
  const int s = static_cast<int>(U.A.constraints.size());
  MatrixXd A = MatrixXd::Zero(s + 2 * n * data.size(), nn);
  VectorXd c(A.rows());
  for (int j = 0; j < s; ++j) {
    A.row(j) = linear::Vec(U.A.constraints[j].V).transpose();
    c(j) = U.A.constraints[j].v;
  }
  for (int k = 0; k < data.size(); ++k) {
    const double beta = U.Bound(data.x[k]);
    for (int i = 0; i < n; ++i) {
      const int row = s + 2 * (k * n + i);
      A.row(row).segment(i * n, n) = data.x[k].transpose();
      c(row) = beta + data.y[k](i);
      A.row(row + 1).segment(i * n, n) = -data.x[k].transpose();
      c(row + 1) = beta - data.y[k](i);
    }
  }
  const geometry::LiftedPolyhedron P(A, MatrixXd(A.rows(), 0), c);
  return geometry::ProjectLinear(geometry::ToProgram(P), TraceSumMap(n), K, settings);
}

Polygon EllipsoidUncertaintySnapshot(const linear::EllipsoidalUncertainty& U0,
                                     const linear::TwoStepData& data, int K,
                                     const conic::SolverSettings& settings) {
  const int n = U0.n;
  const MatrixXd F = TraceSumMap(n);
  const linear::SubspaceResult sub = linear::ConsistentSubspace(data, n);
  if (!sub.consistent) {
    return geometry::PolygonFromSupport(
        [](const Eigen::Vector2d&) {
          SupportResult r;
          r.status = SupportStatus::kEmpty;
          return r;
        },
        K);
  }
  const VectorXd a0 = linear::Vec(sub.param.anchor);
  const int p = sub.param.dimension();
  if (p == 0) {
    const Eigen::Vector2d point = F * a0;
    return geometry::PolygonFromSupport(
        [&](const Eigen::Vector2d& w) { return PointSupport(w, point); }, K);
  }
  const MatrixXd B = sub.param.VecBasis();
  const conic::QuadraticForm qhat = linear::Restrict(U0.q, sub.param);
  const Eigen::LLT<MatrixXd> llt(qhat.Q);
  const VectorXd a_bar = -0.5 * llt.solve(qhat.q);
  const double rho2 = -qhat.Evaluate(a_bar);
  const double scale = std::max(1.0, std::abs(qhat.r));
  if (rho2 < -1e-12 * scale) {
    return geometry::PolygonFromSupport(
        [](const Eigen::Vector2d&) {
          SupportResult r;
          r.status = SupportStatus::kEmpty;
          return r;
        },
        K);
  }
  if (rho2 <= 1e-12 * scale) {
    const Eigen::Vector2d point = F * (a0 + B * a_bar);
    return geometry::PolygonFromSupport(
        [&](const Eigen::Vector2d& w) { return PointSupport(w, point); }, K);
  }
  const double rho = std::sqrt(rho2);
  const MatrixXd Lt = llt.matrixU();
  conic::ConicProgram base;
  const conic::VarRange a = base.AddVariables(p, "a");
  std::vector<AffineExpr> cone = {AffineExpr(rho)};
  for (int i = 0; i < p; ++i) {
    cone.push_back(AffineExpr::Dot(Lt.row(i).transpose(), a) - Lt.row(i).dot(a_bar));
  }
  base.AddSecondOrderCone(cone, "ellipsoid");
  const MatrixXd FB = F * B;
  const Eigen::Vector2d offset = F * a0;
  return geometry::PolygonFromSupport(
      [&](const Eigen::Vector2d& w) {
        conic::ConicProgram program = base;
        program.SetObjective(AffineExpr::Dot(FB.transpose() * w, a), conic::Sense::kMaximize);
        const conic::Solution sol = conic::Solve(program, settings);
        SupportResult r;
        if (sol.status != conic::SolveStatus::kOptimal) return r;
        const Eigen::Vector2d point = offset + FB * sol.Value(a);
        r = PointSupport(w, point);
        r.value = w.dot(offset) + sol.objective_value;
        return r;
      },
      K);
}

Polygon RegionSnapshot(const ExperimentConfig& config, const LearnOutcome& outcome, int k) {
  const int n = config.n, K = config.directions;
  const conic::SolverSettings settings = config.Solver();
  const MatrixXd F = Selector(n, config.dims);
  switch (config.mode) {
    case Mode::kLinear1: {
      const auto region =
          linear::OnestepRegion(config.safety, config.PolytopePrior(), PrefixData(outcome, k));
      return geometry::ProjectLinear(geometry::ToProgram(region), F, K, settings);
    }
    case Mode::kLinear2: {
      const linear::TwoStepData data = PrefixTrajectories(outcome, k);
      const linear::SubspaceResult sub = linear::ConsistentSubspace(data, n);
      if (sub.consistent && sub.param.dimension() == 0) {
        return geometry::ProjectLinear(
            linear::KnownTwostepRegion(config.safety, sub.param.anchor), F, K, settings);
      }
      linear::TwostepSdp sdp =
          linear::BuildTwostepSdp(config.safety, config.EllipsoidPrior(), data, VectorXd::Zero(n));
      return geometry::ProjectLinear({std::move(sdp.program), sdp.x}, F, K, settings);
    }
    case Mode::kNonlinear1:
      return nonlinear::NonlinearRegionPolygon(config.safety, config.Nonlinear(),
                                               PrefixData(outcome, k), config.dims, K, settings);
  }
  throw std::logic_error("RegionSnapshot: unknown mode");
}

namespace {

Polygon UncertaintyAt(const ExperimentConfig& config, const LearnOutcome& outcome, int k) {
  const conic::SolverSettings settings = config.Solver();
  switch (config.mode) {
    case Mode::kLinear1:
      return PolytopeUncertaintySnapshot(config.PolytopePrior(), PrefixData(outcome, k),
                                         config.directions, settings);
    case Mode::kLinear2:
      return EllipsoidUncertaintySnapshot(config.EllipsoidPrior(), PrefixTrajectories(outcome, k),
                                          config.directions, settings);
    case Mode::kNonlinear1:
      return NonlinearUncertaintySnapshot(config.Nonlinear(), PrefixData(outcome, k),
                                          config.directions, settings);
  }
  throw std::logic_error("UncertaintyAt: unknown mode");
}

void Learn(const ExperimentConfig& config, const TrueSystem& sys, RunLog& log) {
  const Polyhedron& S = config.safety;
  const conic::SolverSettings settings = config.Solver();
  const Oracle oracle = [&sys](const VectorXd& x) { return sys.Step(x); };
  switch (config.mode) {
    case Mode::kLinear1: {
      const linear::MatrixPolytope U0 = config.PolytopePrior();
      linear::OnestepSettings os;
      os.epsilon = config.epsilon;
      os.geometry.solver = settings;
      os.safety_tol = config.safety_tol;
      log.outcome = linear::LearnOnline(S, U0, config.c, oracle, os);
      const linear::CostBound upper = linear::OfflineUpperBound(S, U0, config.c, settings);
      if (upper.status == conic::SolveStatus::kOptimal) log.bounds.offline_upper = upper.value;
      const linear::CostBound lower =
          linear::CostLowerBound(S, config.A_star, config.c, config.n, settings);
      if (lower.status == conic::SolveStatus::kOptimal) log.bounds.lower = lower.value;
      if (config.offline) {
        const LearnOutcome offline = linear::LearnOffline(S, U0, config.c, oracle, os);
        if (offline.verdict == Verdict::kLearned) log.bounds.offline_cost = offline.total_cost();
      }
      return;
    }
    case Mode::kLinear2: {
      const linear::EllipsoidalUncertainty U0 = config.EllipsoidPrior();
      linear::TwostepSettings ts;
      ts.solver = settings;
      ts.safety_tol = config.safety_tol;
      ts.max_trajectories = config.max_trajectories;
      const linear::TwoStepOracle oracle2 = [&sys](const VectorXd& x) {
        const Observation obs = Observe(sys, x, 2);
        return std::make_pair(obs.y, obs.z);
      };
      log.outcome = linear::LearnTwoStep(S, U0, config.c, oracle2, ts);
      const int m = log.outcome.verdict == Verdict::kLearned
                        ? log.outcome.measurements_used
                        : linear::DefaultTrajectoryCount(config.n);
      const linear::TwostepBound upper = linear::TwostepOfflineBound(S, U0, config.c, m, ts);
      if (upper.status == conic::SolveStatus::kOptimal) log.bounds.offline_upper = upper.value;
      const linear::TwostepBound lower =
          linear::TwostepLowerBound(S, config.A_star, config.c, m, settings);
      if (lower.status == conic::SolveStatus::kOptimal) log.bounds.lower = lower.value;
      return;
    }
    case Mode::kNonlinear1: {
      const nonlinear::NonlinearUncertainty U = config.Nonlinear();
      nonlinear::CostSampler sampler;
      if (config.sphere_cost) {
        sampler = nonlinear::SphereSampler(config.n, config.explore_seed);
      } else {
        sampler = [c = config.c](int) { return c; };
      }
      nonlinear::ExploreSettings es;
      es.solver = settings;
      es.safety_tol = config.safety_tol;
      log.outcome = nonlinear::SafeExplore(S, U, sampler, config.steps, oracle, es);
      return;
    }
  }
}

}  // namespace

RunLog Run(const ExperimentConfig& config) {
  config.Validate();
  RunLog log;
  log.config = config;
  log.digest = ConfigDigest(config);
  const TrueSystem sys = TrueSystem::FromConfig(config);
  if (config.mode == Mode::kNonlinear1 && config.validate_g) {
    log.nonlinearity = CheckNonlinearity(sys, config.Nonlinear(), config.safety,
                                         config.validation_samples, config.explore_seed);
    if (!log.nonlinearity->pass) {
      std::ostringstream msg;
      msg << "system.g_star: exceeds the nonlinearity bound by "
          << log.nonlinearity->worst_excess << " at x = ("
          << log.nonlinearity->worst_x.transpose() << ")";
      throw ConfigError(msg.str(), 0);
    }
  }
  try {
    Learn(config, sys, log);
  } catch (const std::exception& e) {
    log.outcome.verdict = Verdict::kAborted;
    log.outcome.message = e.what();
    log.audit = Audit(log.outcome, config.safety, config.safety_tol);
    throw RunError(e.what(), std::move(log));
  }
  log.audit = Audit(log.outcome, config.safety, config.safety_tol);
  if (config.snapshots) {
    const int m = static_cast<int>(log.outcome.steps.size());
    for (int k = 0; k <= m; ++k) {
      try {
        log.regions.push_back({k, RegionSnapshot(config, log.outcome, k)});
      } catch (const std::exception& e) {
        log.outcome.warnings.push_back("region snapshot " + std::to_string(k) +
                                       " skipped: " + e.what());
      }
      try {
        log.uncertainty.push_back({k, UncertaintyAt(config, log.outcome, k)});
      } catch (const std::exception& e) {
        log.outcome.warnings.push_back("uncertainty snapshot " + std::to_string(k) +
                                       " skipped: " + e.what());
      }
    }
  }
  return log;
}

void WriteRunLog(const RunLog& log, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "regions");
  fs::create_directories(dir / "uncertainty");
  const LearnOutcome& out = log.outcome;

  json summary;
  summary["verdict"] = ToString(out.verdict);
  summary["message"] = out.message;
  summary["measurements_used"] = out.measurements_used;
  summary["steps"] = out.steps.size();
  summary["total_cost"] = out.total_cost();
  summary["A"] = out.A.size() > 0 ? MatrixJson(out.A) : json(nullptr);
  summary["bounds"] = {{"offline_upper", Optional(log.bounds.offline_upper)},
                       {"offline_cost", Optional(log.bounds.offline_cost)},
                       {"lower", Optional(log.bounds.lower)}};
  summary["warnings"] = out.warnings;
  summary["audit"] = {{"pass", log.audit.pass},
                      {"states", log.audit.states},
                      {"worst_margin", Number(log.audit.worst_margin)},
                      {"violation", Number(log.audit.violation)},
                      {"worst_step", log.audit.worst_step}};
  if (log.nonlinearity) {
    summary["nonlinearity_check"] = {{"pass", log.nonlinearity->pass},
                                     {"samples", log.nonlinearity->samples},
                                     {"worst_excess", Number(log.nonlinearity->worst_excess)}};
  }
  summary["config_digest"] = log.digest;
  summary["config"] = json::parse(SerializeConfig(log.config));
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";

  std::ofstream steps(dir / "steps.csv");
  steps << std::setprecision(std::numeric_limits<double>::max_digits10);
  const int n = log.config.n;
  const int h = out.steps.empty() ? 0 : static_cast<int>(out.steps[0].observations.size());
  bool directions = false;
  for (const StepRecord& s : out.steps) directions |= s.cost_direction.size() == n;
  steps << "k,source,cost,cumulative_cost,uncertainty_width,iterations";
  const char* names[] = {"y", "z"};
  for (int i = 1; i <= n; ++i) steps << ",x" << i;
  for (int o = 0; o < h; ++o) {
    for (int i = 1; i <= n; ++i) steps << ',' << names[o] << i;
  }
  if (directions) {
    for (int i = 1; i <= n; ++i) steps << ",c" << i;
  }
  steps << '\n';
  for (const StepRecord& s : out.steps) {
    steps << s.k << ',' << s.source << ',' << s.cost << ',' << s.cumulative_cost << ','
          << s.uncertainty_width << ',' << s.solver_iterations;
    for (int i = 0; i < n; ++i) steps << ',' << s.x(i);
    for (int o = 0; o < h; ++o) {
      for (int i = 0; i < n; ++i) steps << ',' << s.observations[o](i);
    }
    if (directions) {
      for (int i = 0; i < n; ++i) {
        steps << ',' << (s.cost_direction.size() == n ? s.cost_direction(i) : 0.0);
      }
    }
    steps << '\n';
  }

  for (const Snapshot& snap : log.regions) {
    std::ofstream f(dir / "regions" / ("step_" + std::to_string(snap.step) + ".csv"));
    geometry::WritePolygonCsv(snap.polygon, f);
  }
  for (const Snapshot& snap : log.uncertainty) {
    std::ofstream f(dir / "uncertainty" / ("step_" + std::to_string(snap.step) + ".csv"));
    geometry::WritePolygonCsv(snap.polygon, f);
  }
}

LoggedSteps ReadSteps(const std::filesystem::path& steps_csv) {
  std::ifstream in(steps_csv);
  if (!in) throw std::runtime_error("cannot read " + steps_csv.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty steps file");
  const std::vector<std::string> header = split(line);
  std::vector<int> xs, cost;
  std::vector<std::vector<int>> obs(2);
  for (size_t j = 0; j < header.size(); ++j) {
    const std::string& name = header[j];
    if (name == "cost") cost.push_back(static_cast<int>(j));
    if (name.size() < 2 || name.find_first_not_of("0123456789", 1) != std::string::npos) continue;
    if (name[0] == 'x') xs.push_back(static_cast<int>(j));
    if (name[0] == 'y') obs[0].push_back(static_cast<int>(j));
    if (name[0] == 'z') obs[1].push_back(static_cast<int>(j));
  }
  if (xs.empty() || cost.size() != 1) throw std::runtime_error("steps file lacks x or cost columns");
  if (obs[1].empty()) obs.pop_back();
  LoggedSteps steps;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("steps file row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells");
    }
    auto read = [&](const std::vector<int>& cols) {
      VectorXd v(cols.size());
      for (size_t i = 0; i < cols.size(); ++i) v(i) = std::stod(cells[cols[i]]);
      return v;
    };
    steps.x.push_back(read(xs));
    steps.observations.emplace_back();
    for (const auto& cols : obs) {
      if (!cols.empty()) steps.observations.back().push_back(read(cols));
    }
    steps.cost.push_back(std::stod(cells[cost[0]]));
  }
  return steps;
}

FitReport RunFit(const ExperimentConfig& config, const MeasurementSet& data) {
  if (config.mode != Mode::kNonlinear1) throw std::invalid_argument("fit needs nonlinear1");
  if (data.size() < config.fit_train) {
    throw std::invalid_argument("fit needs " + std::to_string(config.fit_train) +
                                " measurements, have " + std::to_string(data.size()));
  }
  const MeasurementSet train = data.Prefix(config.fit_train);
  const TrueSystem sys = TrueSystem::FromConfig(config);
  FitReport report;
  report.train = train.size();
  report.least_squares = nonlinear::FitLeastSquares(train);
  conic::SolverSettings settings = config.Solver();
  report.sos = nonlinear::FitSosConstrained(train, config.safety, config.Nonlinear(), settings);
  const std::vector<VectorXd> tests =
      SamplePolyhedron(config.safety, config.fit_test, config.test_seed);
  report.test = static_cast<int>(tests.size());
  const Oracle truth = [&sys](const VectorXd& x) { return sys.Step(x); };
  report.rmse_least_squares = nonlinear::Rmse(report.least_squares, truth, tests);
  report.rmse_sos = report.sos.status == conic::SolveStatus::kOptimal
                        ? nonlinear::Rmse(report.sos.model, truth, tests)
                        : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace safelearn::harness
