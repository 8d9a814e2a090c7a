// Command-line front end for the safe-learning experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "safelearn/config.h"
#include "safelearn/harness.h"

namespace {

namespace fs = std::filesystem;
using safelearn::ConfigError;
using safelearn::ExperimentConfig;
using safelearn::LearnOutcome;
using safelearn::Mode;
using safelearn::Verdict;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitImpossible = 2;
constexpr int kExitConfig = 64;

struct Overrides {
  std::optional<double> epsilon, feas_tol, gap_tol;
  std::optional<std::uint64_t> seed, test_seed;
  std::optional<int> directions;
  bool no_validate = false;
  bool no_snapshots = false;
};

void AddOverrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--epsilon", o.epsilon, "Margin used when choosing queries (default 0.01)");
  cmd->add_option("--seed", o.seed, "Exploration seed");
  cmd->add_option("--test-seed", o.test_seed, "Seed for the fit test points");
  cmd->add_option("--directions", o.directions, "Directions per snapshot polygon (default 128)");
  cmd->add_option("--feas-tol", o.feas_tol, "Solver feasibility tolerance");
  cmd->add_option("--gap-tol", o.gap_tol, "Solver duality-gap tolerance");
  cmd->add_flag("--no-validate", o.no_validate, "Skip the sampled check of g_star");
  cmd->add_flag("--no-snapshots", o.no_snapshots, "Skip region and uncertainty snapshots");
}

ExperimentConfig Load(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg;
  try {
    cfg = safelearn::LoadConfig(path);
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw ConfigError(path + ":" + std::to_string(e.line()) + ": " + e.message(), 0);
    throw ConfigError(path + ": " + e.message(), 0);
  }
  if (o.epsilon) cfg.epsilon = *o.epsilon;
  if (o.seed) cfg.explore_seed = *o.seed;
  if (o.test_seed) cfg.test_seed = *o.test_seed;
  if (o.directions) cfg.directions = *o.directions;
  if (o.feas_tol) cfg.feas_tol = *o.feas_tol;
  if (o.gap_tol) cfg.gap_tol = *o.gap_tol;
  if (o.no_validate) cfg.validate_g = false;
  if (o.no_snapshots) cfg.snapshots = false;
  if (!(cfg.epsilon > 0) || cfg.directions < 3 || !(cfg.feas_tol > 0) || !(cfg.gap_tol > 0)) {
    throw ConfigError(path + ": override out of range", 0);
  }
  return cfg;
}

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void PrintRow(const std::string& label, const std::optional<double>& v) {
  std::printf("  %-22s %s\n", label.c_str(), v ? Fixed(*v).c_str() : "n/a");
}

// Step records of a logged run.
LearnOutcome FromLog(const fs::path& dir) {
  const safelearn::harness::LoggedSteps logged =
      safelearn::harness::ReadSteps(dir / "steps.csv");
  LearnOutcome outcome;
  double total = 0.0;
  for (size_t k = 0; k < logged.x.size(); ++k) {
    safelearn::StepRecord step;
    step.k = static_cast<int>(k) + 1;
    step.x = logged.x[k];
    step.observations = logged.observations[k];
    step.cost = logged.cost[k];
    total += step.cost;
    step.cumulative_cost = total;
    outcome.steps.push_back(step);
  }
  return outcome;
}

int Learn(const std::string& path, const Overrides& o, Mode expected, const std::string& out) {
  const ExperimentConfig cfg = Load(path, o);
  if (cfg.mode != expected) {
    throw ConfigError(path + ": mode is " + safelearn::ToString(cfg.mode) +
                          ", this subcommand needs " + safelearn::ToString(expected),
                      0);
  }
  const fs::path dir = out.empty() ? fs::path("runs") / (cfg.name.empty() ? "run" : cfg.name)
                                   : fs::path(out);
  safelearn::harness::RunLog log;
  try {
    log = safelearn::harness::Run(cfg);
  } catch (const safelearn::harness::RunError& e) {
    safelearn::harness::WriteRunLog(e.log(), dir);
    std::fprintf(stderr, "error: %s (partial log in %s)\n", e.what(), dir.c_str());
    return kExitError;
  }
  safelearn::harness::WriteRunLog(log, dir);

  const LearnOutcome& outcome = log.outcome;
  std::printf("%s: %s after %zu queries\n", cfg.name.c_str(),
              safelearn::ToString(outcome.verdict).c_str(), outcome.steps.size());
  if (!outcome.message.empty()) std::printf("  %s\n", outcome.message.c_str());
  PrintRow("online cost", outcome.total_cost());
  if (cfg.mode != Mode::kNonlinear1) {
    PrintRow("offline upper bound", log.bounds.offline_upper);
    if (cfg.offline) PrintRow("offline cost", log.bounds.offline_cost);
    PrintRow("lower bound", log.bounds.lower);
  }
  if (log.audit.states > 0) {
    std::printf("  %-22s %s (worst margin %.3g over %d states)\n", "audit",
                log.audit.pass ? "pass" : "FAIL", log.audit.worst_margin, log.audit.states);
  }
  for (const std::string& w : outcome.warnings) std::printf("  warning: %s\n", w.c_str());
  std::printf("  log written to %s\n", dir.c_str());

  switch (outcome.verdict) {
    case Verdict::kLearned:
    case Verdict::kCompleted:
      return log.audit.pass ? kExitOk : kExitError;
    case Verdict::kImpossible:
      return kExitImpossible;
    case Verdict::kAborted:
      return kExitError;
  }
  return kExitError;
}

int Bounds(const std::string& path, const Overrides& o, const std::string& log_dir) {
  const ExperimentConfig cfg = Load(path, o);
  const safelearn::geometry::Polyhedron& S = cfg.safety;
  const safelearn::conic::SolverSettings settings = cfg.Solver();
  std::optional<double> upper, lower, online;
  switch (cfg.mode) {
    case Mode::kLinear1: {
      const auto up = safelearn::linear::OfflineUpperBound(S, cfg.PolytopePrior(), cfg.c, settings);
      if (up.status == safelearn::conic::SolveStatus::kOptimal) upper = up.value;
      const auto lo = safelearn::linear::CostLowerBound(S, cfg.A_star, cfg.c, cfg.n, settings);
      if (lo.status == safelearn::conic::SolveStatus::kOptimal) lower = lo.value;
      break;
    }
    case Mode::kLinear2: {
      const int m = safelearn::linear::DefaultTrajectoryCount(cfg.n);
      safelearn::linear::TwostepSettings ts;
      ts.solver = settings;
      const auto up = safelearn::linear::TwostepOfflineBound(S, cfg.EllipsoidPrior(), cfg.c, m, ts);
      if (up.status == safelearn::conic::SolveStatus::kOptimal) upper = up.value;
      const auto lo = safelearn::linear::TwostepLowerBound(S, cfg.A_star, cfg.c, m, settings);
      if (lo.status == safelearn::conic::SolveStatus::kOptimal) lower = lo.value;
      break;
    }
    case Mode::kNonlinear1:
      throw ConfigError(path + ": bounds are defined for linear1 and linear2", 0);
  }
  if (!log_dir.empty()) online = FromLog(log_dir).total_cost();
  std::printf("%s cost bounds\n", cfg.name.c_str());
  PrintRow("offline upper bound", upper);
  PrintRow("online cost", online);
  PrintRow("lower bound", lower);
  return upper && lower ? kExitOk : kExitError;
}

int Region(const std::string& path, const Overrides& o, const std::string& log_dir, int step,
           const std::vector<int>& dims, const std::string& out) {
  ExperimentConfig cfg = Load(path, o);
  if (!dims.empty()) {
    if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1 || dims[0] > cfg.n || dims[1] > cfg.n) {
      throw ConfigError("--dims needs two coordinates in 1.." + std::to_string(cfg.n), 0);
    }
    cfg.dims = {dims[0] - 1, dims[1] - 1};
  }
  const LearnOutcome outcome = log_dir.empty() ? LearnOutcome{} : FromLog(log_dir);
  if (step < 0 || step > static_cast<int>(outcome.steps.size())) {
    std::fprintf(stderr, "error: step %d not available (log has %zu steps)\n", step,
                 outcome.steps.size());
    return kExitError;
  }
  const auto polygon = safelearn::harness::RegionSnapshot(cfg, outcome, step);
  if (out.empty()) {
    safelearn::geometry::WritePolygonCsv(polygon, std::cout);
  } else {
    std::ofstream f(out);
    safelearn::geometry::WritePolygonCsv(polygon, f);
  }
  return polygon.empty ? kExitError : kExitOk;
}

int Fit(const std::string& path, const Overrides& o, const std::string& data_path,
        const std::string& out) {
  ExperimentConfig cfg = Load(path, o);
  if (cfg.mode != Mode::kNonlinear1) throw ConfigError(path + ": fit needs nonlinear1", 0);
  safelearn::linear::MeasurementSet data;
  if (data_path.empty()) {
    cfg.steps = cfg.fit_train;
    cfg.snapshots = false;
    const safelearn::harness::RunLog log = safelearn::harness::Run(cfg);
    for (const auto& s : log.outcome.steps) data.Add(s.x, s.observations[0]);
  } else {
    const auto logged = safelearn::harness::ReadSteps(data_path);
    for (size_t k = 0; k < logged.x.size(); ++k) data.Add(logged.x[k], logged.observations[k][0]);
  }
  const safelearn::harness::FitReport report = safelearn::harness::RunFit(cfg, data);
  const fs::path dir = out.empty() ? fs::path("runs") / (cfg.name + "-fit") : fs::path(out);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "model_least_squares.txt");
    report.least_squares.Write(f);
  }
  if (report.sos.status == safelearn::conic::SolveStatus::kOptimal) {
    std::ofstream f(dir / "model_sos.txt");
    report.sos.model.Write(f);
  }
  std::printf("%s fit on %d points, %d test points (seed %llu)\n", cfg.name.c_str(), report.train,
              report.test, static_cast<unsigned long long>(cfg.test_seed));
  std::printf("  %-22s %.4f\n", "RMSE least squares", report.rmse_least_squares);
  std::printf("  %-22s %.4f (%s)\n", "RMSE SOS-constrained", report.rmse_sos,
              safelearn::conic::ToString(report.sos.status).c_str());
  std::printf("  models written to %s\n", dir.c_str());
  return report.sos.status == safelearn::conic::SolveStatus::kOptimal ? kExitOk : kExitError;
}

int AuditLog(const std::string& log_dir, const std::string& path, const Overrides& o) {
  const ExperimentConfig cfg = Load(path, o);
  const safelearn::harness::LoggedSteps logged =
      safelearn::harness::ReadSteps(fs::path(log_dir) / "steps.csv");
  std::vector<Eigen::VectorXd> states;
  for (size_t k = 0; k < logged.x.size(); ++k) {
    states.push_back(logged.x[k]);
    for (const auto& y : logged.observations[k]) states.push_back(y);
  }
  const auto report = safelearn::harness::AuditStates(states, cfg.safety, cfg.safety_tol);
  std::printf("audit %s: %d states, worst margin %.6g, violation %.6g\n",
              report.pass ? "pass" : "FAIL", report.states, report.worst_margin,
              report.violation);
  return report.pass ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe learning of discrete-time dynamics"};
  app.require_subcommand(1);
  Overrides o;
  std::string config, out, log_dir, data_path;
  int step = 0;
  std::vector<int> dims;

  struct LearnCommand {
    const char* name;
    Mode mode;
    const char* help;
  };
  const LearnCommand learn_commands[] = {
      {"learn1", Mode::kLinear1, "One-step safe learning of a linear system"},
      {"learn2", Mode::kLinear2, "Two-step safe learning under an ellipsoidal prior"},
      {"learnN", Mode::kNonlinear1, "Safe exploration of a nonlinear system"},
  };
  std::vector<std::pair<CLI::App*, Mode>> learners;
  for (const LearnCommand& lc : learn_commands) {
    CLI::App* cmd = app.add_subcommand(lc.name, lc.help);
    cmd->add_option("config", config, "Experiment config (JSON)")->required();
    cmd->add_option("--out", out, "Run log directory (default runs/<name>)");
    AddOverrides(cmd, o);
    learners.emplace_back(cmd, lc.mode);
  }

  CLI::App* bounds = app.add_subcommand("bounds", "Offline upper and A*-informed lower cost bounds");
  bounds->add_option("config", config)->required();
  bounds->add_option("--log", log_dir, "Run log whose online cost is reported");
  AddOverrides(bounds, o);

  CLI::App* region = app.add_subcommand("region", "Safe region polygon as CSV");
  region->add_option("config", config)->required();
  region->add_option("--log", log_dir, "Run log providing the measurements");
  region->add_option("--step", step, "Number of logged measurements to use (default 0)");
  region->add_option("--dims", dims, "Two coordinates, 1-based")->expected(2)->delimiter(',');
  region->add_option("--out", out, "CSV file (default stdout)");
  AddOverrides(region, o);

  CLI::App* fit = app.add_subcommand("fit", "Least-squares and SOS-constrained model fits");
  fit->add_option("config", config)->required();
  fit->add_option("--data", data_path, "steps.csv of an exploration run (default: explore now)");
  fit->add_option("--out", out, "Model directory (default runs/<name>-fit)");
  AddOverrides(fit, o);

  CLI::App* audit = app.add_subcommand("audit", "Check every logged state against S");
  audit->add_option("log", log_dir, "Run log directory")->required();
  audit->add_option("config", config)->required();
  AddOverrides(audit, o);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [cmd, mode] : learners) {
      if (cmd->parsed()) return Learn(config, o, mode, out);
    }
    if (bounds->parsed()) return Bounds(config, o, log_dir);
    if (region->parsed()) return Region(config, o, log_dir, step, dims, out);
    if (fit->parsed()) return Fit(config, o, data_path, out);
    if (audit->parsed()) return AuditLog(log_dir, config, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
