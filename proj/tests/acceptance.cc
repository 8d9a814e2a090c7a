// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "instances.h"
#include "oracles.h"
#include "safelearn/config.h"
#include "safelearn/conic_transforms.h"
#include "safelearn/geometry.h"
#include "safelearn/harness.h"
#include "safelearn/linear_onestep.h"
#include "safelearn/linear_twostep.h"
#include "safelearn/nonlinear_onestep.h"

namespace safelearn {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using geometry::LiftedPolyhedron;
using geometry::Polyhedron;

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::string kDir = SAFELEARN_CONFIG_DIR;

struct Report {
  bool pass = true;
  std::ostringstream detail;

  // Records a failed check without stopping the criterion.
  void Check(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    detail << " [failed: " << what << "]";
  }
};

ExperimentConfig Load(const std::string& name) {
  return LoadConfig(kDir + "/" + name + ".json");
}

bool Near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double MinEigenvalue(const MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

linear::MeasurementSet DataOf(const LearnOutcome& outcome) {
  linear::MeasurementSet data;
  for (const auto& step : outcome.steps) data.Add(step.x, step.observations.at(0));
  return data;
}

double Area(const geometry::Polygon& P) {
  double a = 0.0;
  const auto& v = P.vertices;
  for (size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - p.y() * q.x();
  }
  return 0.5 * std::abs(a);
}

// Linear one-step example.
void LinearOnestepExample(Report& v) {
  ExperimentConfig cfg = Load("onestep-4d");
  cfg.snapshots = false;
  const harness::RunLog log = harness::Run(cfg);
  const LearnOutcome& out = log.outcome;
  const double error = out.A.size() ? (out.A - cfg.A_star).norm() : kInf;
  const double upper = log.bounds.offline_upper.value_or(kInf);
  const double lower = log.bounds.lower.value_or(-kInf);
  const double online = out.total_cost();
  v.detail << "verdict " << ToString(out.verdict) << ", " << out.measurements_used
           << " measurements, |A-A*| " << error << ", upper " << upper << ", online "
           << online << " (reference -1.6385, off by " << std::abs(online + 1.6385)
           << "), lower " << lower;
  v.Check(out.verdict == safelearn::Verdict::kLearned, "verdict");
  v.Check(out.measurements_used == 4, "measurement count");
  v.Check(error <= 1e-6, "recovered matrix");
  v.Check(Near(upper, -1.0, 1e-3), "upper bound");
  v.Check(Near(lower, -2.2264, 1e-3), "lower bound");
  v.Check(online >= lower - 1e-9 && online <= upper + 1e-9, "cost sandwich");
  v.Check(harness::Audit(out, cfg.safety).pass, "safety audit");
}

void ImpossibleExample(Report& v) {
  ExperimentConfig cfg = Load("impossible-2d");
  cfg.snapshots = false;
  v.detail << "verdicts";
  for (double eps : {0.01, 0.5, 1.0}) {
    cfg.epsilon = eps;
    const harness::RunLog log = harness::Run(cfg);
    v.detail << " " << eps << ":" << ToString(log.outcome.verdict);
    v.Check(log.outcome.verdict == safelearn::Verdict::kImpossible, "epsilon " +
                                                                        std::to_string(eps));
  }
}

harness::RunLog TwostepRun() {
  ExperimentConfig cfg = Load("twostep-4d");
  cfg.snapshots = false;
  return harness::Run(cfg);
}

void LinearTwostepExample(Report& v) {
  const harness::RunLog log = TwostepRun();
  const LearnOutcome& out = log.outcome;
  const double error = out.A.size() ? (out.A - log.config.A_star).norm() : kInf;
  const double online = out.total_cost();
  const double offline = log.bounds.offline_upper.value_or(kInf);
  const double lower = log.bounds.lower.value_or(-kInf);
  v.detail << "verdict " << ToString(out.verdict) << ", " << out.measurements_used
           << " trajectories, |A-A*| " << error << ", online " << online << ", offline "
           << offline << ", lower " << lower;
  v.Check(out.verdict == safelearn::Verdict::kLearned, "verdict");
  v.Check(out.measurements_used == 2, "trajectory count");
  v.Check(error <= 1e-6, "recovered matrix");
  v.Check(Near(online, -0.1508, 1e-2), "online cost");
  v.Check(Near(offline, -0.1099, 1e-2), "offline cost");
  v.Check(Near(lower, -0.2097, 1e-2), "lower bound");
  v.Check(harness::Audit(out, log.config.safety).pass, "safety audit");
}

void NonlinearSafety(Report& v) {
  const ExperimentConfig cfg = Load("nonlinear-4d");
  const harness::RunLog log = harness::Run(cfg);
  const LearnOutcome& out = log.outcome;
  int nested = 0;
  for (size_t k = 1; k < log.regions.size(); ++k) {
    nested += log.regions[k].polygon.ContainsPolygon(log.regions[k - 1].polygon, 1e-6);
  }
  v.detail << "verdict " << ToString(out.verdict) << ", " << out.steps.size() << " steps, "
           << log.audit.states << " states, worst margin " << log.audit.worst_margin << ", "
           << nested << "/" << (log.regions.empty() ? 0 : log.regions.size() - 1)
           << " region pairs nested (K=" << cfg.directions << ")";
  v.Check(out.verdict == safelearn::Verdict::kCompleted, "verdict");
  v.Check(out.steps.size() == 30, "step count");
  v.Check(log.audit.states == 60 && log.audit.worst_margin >= -1e-6, "safety margin");
  v.Check(log.regions.size() == 31, "snapshot count");
  v.Check(nested + 1 == static_cast<int>(log.regions.size()), "nesting");
}

void GammaMonotonicity(Report& v) {
  const ExperimentConfig cfg = Load("nonlinear-4d");
  std::vector<geometry::Polygon> polygons;
  v.detail << "areas";
  for (double gamma : {0.0, 0.4, 0.8}) {
    nonlinear::NonlinearUncertainty U = cfg.Nonlinear();
    U.gamma = gamma;
    polygons.push_back(
        nonlinear::NonlinearRegionPolygon(cfg.safety, U, {}, cfg.dims, cfg.directions));
    v.detail << " " << gamma << ":" << Area(polygons.back());
    v.Check(!polygons.back().empty && !polygons.back().unbounded, "polygon");
  }
  for (size_t i = 1; i < polygons.size(); ++i) {
    v.Check(polygons[i - 1].ContainsPolygon(polygons[i], 1e-6), "nesting");
  }
}

harness::FitReport FitExample() {
  ExperimentConfig cfg = Load("nonlinear-4d");
  cfg.snapshots = false;
  const harness::RunLog log = harness::Run(cfg);
  return harness::RunFit(cfg, DataOf(log.outcome));
}

void Fitting(Report& v) {
  const harness::FitReport fit = FitExample();
  v.detail << fit.train << " training points, " << fit.test << " test points, RMSE least squares "
           << fit.rmse_least_squares << ", RMSE SOS " << fit.rmse_sos;
  v.Check(fit.train == 8 && fit.test == 1000, "sample sizes");
  v.Check(fit.sos.status == conic::SolveStatus::kOptimal, "SOS solve");
  v.Check(fit.rmse_sos < fit.rmse_least_squares, "ordering");
  for (double r : {fit.rmse_least_squares, fit.rmse_sos}) {
    v.Check(r >= 0.02 && r <= 0.5, "band");
  }
}

// Planar polygon with at most six facets: full-dimensional, a point or a
// segment, with random extra cuts that may empty it.
LiftedPolyhedron RandomPolygon(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss;
  const int kind = static_cast<int>(rng() % 3);
  std::vector<Eigen::RowVector2d> rows;
  std::vector<double> rhs;
  const Eigen::Vector2d z(unif(rng), unif(rng));
  if (kind == 0) {
    const int r = 3 + static_cast<int>(rng() % 4);
    for (int i = 0; i < r; ++i) {
      const double angle = 2.0 * M_PI * (i + 0.2 * unif(rng)) / r;
      const Eigen::RowVector2d h(std::cos(angle), std::sin(angle));
      rows.push_back(h);
      rhs.push_back(h.dot(z) + 0.6 * unif(rng));
    }
  } else {
    const double angle = M_PI * unif(rng);
    const Eigen::RowVector2d a(std::cos(angle), std::sin(angle)), t(-a(1), a(0));
    const double w = kind == 1 ? 0.0 : 0.5 * std::abs(unif(rng)) + 0.1;
    rows = {a, -a, t, -t};
    rhs = {a.dot(z), -a.dot(z), t.dot(z) + w, -t.dot(z)};
    for (int extra = static_cast<int>(rng() % 3); extra > 0; --extra) {
      const Eigen::RowVector2d h(gauss(rng), gauss(rng));
      rows.push_back(h);
      rhs.push_back(h.dot(z) + 0.5 * unif(rng));
    }
  }
  MatrixXd A(rows.size(), 2);
  VectorXd c(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    A.row(i) = rows[i];
    c(i) = rhs[i];
  }
  return LiftedPolyhedron(A, MatrixXd(rows.size(), 0), c);
}

// 0 for instances within solver tolerance of a status change, else 1 empty,
// 2 singleton, 3 wider.
int CheckGeometryInstance(const LiftedPolyhedron& P, Report& v, int trial) {
  const auto vertices = testing::ProjectedVertices(P, 1e-9);
  if (vertices.empty() && !testing::ProjectedVertices(P, 1e-4).empty()) return 0;
  double width = 0.0;
  for (const auto& a : vertices) {
    for (const auto& b : vertices) width = std::max(width, (a - b).cwiseAbs().maxCoeff());
  }
  if (width > 1e-7 && width < 1e-4) return 0;
  const std::string tag = "geometry " + std::to_string(trial);
  const geometry::SingletonResult s = geometry::IsSingleton(P, 1e-6);
  const geometry::SpanBasisResult span = geometry::SpanBasis(P);
  if (vertices.empty()) {
    v.Check(s.status == geometry::SingletonStatus::kEmpty, tag + " singleton");
    v.Check(span.empty, tag + " span");
    return 1;
  }
  if (width <= 1e-7) {
    v.Check(s.status == geometry::SingletonStatus::kSingleton &&
                (s.point - vertices.front()).norm() < 1e-6,
            tag + " singleton");
  } else {
    v.Check(s.status == geometry::SingletonStatus::kNotSingleton &&
                Near(s.max_width(), width, 1e-6),
            tag + " singleton");
  }
  v.Check(!span.empty && span.basis.size() == testing::NumericRank(vertices, 1e-9),
          tag + " span");
  for (const auto& b : span.basis.vectors()) {
    v.Check((P.A * b - P.c).maxCoeff() <= 1e-6, tag + " basis membership");
  }
  return width <= 1e-7 ? 2 : 3;
}

struct OnestepInstance {
  Polyhedron S;
  linear::MatrixPolytope U0;
  MatrixXd A_star;
  linear::MeasurementSet data;
  VectorXd c;
};

// Box S with up to two extra cuts, entrywise-box prior around A*.
OnestepInstance RandomOnestep(std::mt19937_64& rng, int max_data) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss;
  const int extra = static_cast<int>(rng() % 3);
  MatrixXd H(4 + extra, 2);
  VectorXd b(4 + extra);
  H.topRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
  b.head(4).setOnes();
  for (int i = 0; i < extra; ++i) {
    H.row(4 + i) << gauss(rng), gauss(rng);
    b(4 + i) = 0.3 + 0.7 * std::abs(unif(rng));
  }
  OnestepInstance inst{Polyhedron(H, b), {}, MatrixXd(2, 2), {}, VectorXd(2)};
  MatrixXd lo(2, 2), hi(2, 2);
  for (int i = 0; i < 4; ++i) {
    inst.A_star(i) = 0.6 * unif(rng);
    lo(i) = inst.A_star(i) - 0.1 - std::abs(unif(rng));
    hi(i) = inst.A_star(i) + 0.1 + std::abs(unif(rng));
  }
  inst.U0 = linear::MatrixPolytope::EntrywiseBox(lo, hi);
  const int m = static_cast<int>(rng() % (max_data + 1));
  for (int k = 0; k < m; ++k) {
    const VectorXd x = Eigen::Vector2d(unif(rng), unif(rng));
    inst.data.Add(x, inst.A_star * x);
  }
  inst.c = Eigen::Vector2d(gauss(rng), gauss(rng));
  return inst;
}

// min c'x over {x in S | V x in S for every vertex V of U_k}.
double BruteForceOnestep(const OnestepInstance& inst) {
  std::vector<MatrixXd> vertices;
  for (const auto& u : testing::ProjectedVertices(linear::UncertaintySet(inst.U0, inst.data))) {
    vertices.push_back(linear::Unvec(u, 2));
  }
  const int r = inst.S.num_halfspaces();
  MatrixXd H((1 + vertices.size()) * r, 2);
  VectorXd b((1 + vertices.size()) * r);
  H.topRows(r) = inst.S.H();
  b.head(r) = inst.S.b();
  for (size_t k = 0; k < vertices.size(); ++k) {
    H.middleRows((k + 1) * r, r) = inst.S.H() * vertices[k];
    b.segment((k + 1) * r, r) = inst.S.b();
  }
  double best = kInf;
  for (const auto& x : testing::ProjectedVertices(LiftedPolyhedron(H, MatrixXd(H.rows(), 0), b))) {
    best = std::min(best, inst.c.dot(x));
  }
  return best;
}

void OracleEquivalence(Report& v) {
  constexpr int kInstances = 60;
  std::mt19937_64 rng(2024);

  int geometry_checked = 0;
  int kinds[4] = {0, 0, 0, 0};
  for (int trial = 0; geometry_checked < kInstances && trial < 10 * kInstances; ++trial) {
    const int kind = CheckGeometryInstance(RandomPolygon(rng), v, trial);
    ++kinds[kind];
    geometry_checked += kind > 0;
  }
  v.Check(geometry_checked >= kInstances, "geometry instance count");

  double lp_gap = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const OnestepInstance inst = RandomOnestep(rng, 1);
    const linear::SafePoint p = linear::MinCostSafePoint(inst.S, inst.U0, inst.data, inst.c);
    const double brute = BruteForceOnestep(inst);
    const bool ok = p.status == conic::SolveStatus::kOptimal;
    if (ok) lp_gap = std::max(lp_gap, std::abs(p.value - brute));
    v.Check(ok && std::abs(p.value - brute) <= 1e-6, "one-step " + std::to_string(t));
  }

  double sdp_gap = 0.0;
  std::uniform_real_distribution<double> center(-3.0, 3.0), radius(0.05, 1.5), weight(0.5, 2.0);
  const Polyhedron interval = Polyhedron::Box(1, -1.0, 1.0);
  for (int t = 0; t < kInstances; ++t) {
    const double m = center(rng), g = radius(rng);
    const double c = (rng() % 2 ? 1.0 : -1.0) * weight(rng);
    const double worst = std::max(std::abs(m - g), std::abs(m + g));
    const double reach = std::min({1.0, 1.0 / worst, 1.0 / (worst * worst)});
    const linear::TwostepPoint p = linear::MinCostTwostepPoint(
        interval, linear::EllipsoidalUncertainty::FrobeniusBall(MatrixXd::Constant(1, 1, m), g),
        {}, VectorXd::Constant(1, c));
    const bool ok = p.status == conic::SolveStatus::kOptimal;
    const double gap = ok ? std::abs(p.value + std::abs(c) * reach) : kInf;
    sdp_gap = std::max(sdp_gap, gap);
    v.Check(gap <= 1e-4, "two-step " + std::to_string(t));
  }

  double socp_gap = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const OnestepInstance inst = RandomOnestep(rng, 3);
    nonlinear::NonlinearUncertainty U;
    U.A = inst.U0;
    const conic::Solution a =
        conic::Solve(nonlinear::BuildNonlinearSocp(inst.S, U, inst.data, inst.c).program);
    const conic::Solution b =
        conic::Solve(linear::BuildOnestepLp(inst.S, inst.U0, inst.data, inst.c).program);
    bool ok = a.status == b.status;
    if (ok && a.optimal()) {
      socp_gap = std::max(socp_gap, std::abs(a.objective_value - b.objective_value));
      ok = std::abs(a.objective_value - b.objective_value) <= 1e-7;
    }
    v.Check(ok, "zero gamma " + std::to_string(t));
  }

  v.detail << geometry_checked << " geometry instances (" << kinds[1] << " empty, " << kinds[2]
           << " points), " << kInstances
           << " instances each for one-step LP (max gap " << lp_gap << "), scalar two-step (max gap "
           << sdp_gap << "), zero-gamma SOCP (max gap " << socp_gap << ")";
}

// Smallest eigenvalue over the S-lemma blocks of one solved two-step SDP.
double SlemmaMinEigenvalue(const linear::TwostepSdp& sdp, const conic::Solution& sol) {
  const VectorXd x = sol.Value(sdp.x);
  const VectorXd l1 = sol.Value(sdp.lambda1), l2 = sol.Value(sdp.lambda2);
  double worst = kInf;
  for (size_t i = 0; i < sdp.facets.size(); ++i) {
    worst = std::min({worst, l1(i), l2(i)});
    for (const auto& form : {linear::CertificateForm(l1(i), sdp.qhat, sdp.facets[i].First(x)),
                             linear::CertificateForm(l2(i), sdp.qhat, sdp.facets[i].Second(x))}) {
      worst = std::min(worst, MinEigenvalue(conic::QuadraticNonnegToPsd(form)));
    }
  }
  return worst;
}

void CertificateSuite(Report& v) {
  int sdps = 0;
  double sdp_worst = kInf;
  auto check_sdp = [&](const Polyhedron& S, const linear::EllipsoidalUncertainty& U0,
                       const linear::TwoStepData& data, const VectorXd& c,
                       const std::string& tag) {
    const linear::TwostepSdp sdp = linear::BuildTwostepSdp(S, U0, data, c);
    const conic::Solution sol = conic::Solve(sdp.program, conic::SolverSettings::Conic());
    v.Check(sol.optimal(), tag + " solve");
    if (!sol.optimal()) return;
    const double e = SlemmaMinEigenvalue(sdp, sol);
    sdp_worst = std::min(sdp_worst, e);
    v.Check(e >= -1e-6, tag + " S-lemma block");
    ++sdps;
  };

  // The SDP behind every query of the two-step example.
  const harness::RunLog run = TwostepRun();
  const ExperimentConfig& cfg = run.config;
  linear::TwoStepData data;
  for (const auto& step : run.outcome.steps) {
    check_sdp(cfg.safety, cfg.EllipsoidPrior(), data, cfg.c,
              "example step " + std::to_string(step.k));
    data.push_back({step.x, step.observations.at(0), step.observations.at(1)});
  }

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unif(-1.0, 1.0), offset(0.4, 1.5), radius(0.05, 0.5);
  for (int t = 0; t < 25; ++t) {
    const int extra = static_cast<int>(rng() % 3);
    MatrixXd H(4 + extra, 2);
    VectorXd b(4 + extra);
    H.topRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
    for (int i = 0; i < 4; ++i) b(i) = offset(rng);
    for (int i = 4; i < 4 + extra; ++i) {
      H.row(i) << unif(rng), unif(rng);
      b(i) = offset(rng);
    }
    const MatrixXd A0 = MatrixXd::NullaryExpr(2, 2, [&] { return 1.2 * unif(rng); });
    const double gamma = radius(rng);
    const VectorXd c = Eigen::Vector2d(unif(rng), unif(rng));
    const auto U0 = linear::EllipsoidalUncertainty::FrobeniusBall(A0, gamma);
    check_sdp(Polyhedron(H, b), U0, {}, c, "random " + std::to_string(t));
  }

  int grams = 0;
  double gram_worst = kInf, residual_worst = 0.0;
  auto check_sos = [&](const nonlinear::SosFit& fit, const Polyhedron& S, double gamma,
                       const std::string& tag) {
    v.Check(fit.status == conic::SolveStatus::kOptimal, tag + " solve");
    if (fit.status != conic::SolveStatus::kOptimal) return;
    const double e = fit.certificate.MinEigenvalue();
    const double residual = fit.certificate.IdentityResidual(fit.model, S, gamma);
    gram_worst = std::min(gram_worst, e);
    residual_worst = std::max(residual_worst, residual);
    v.Check(e >= -1e-6, tag + " Gram matrix");
    v.Check(residual <= 1e-7, tag + " identity residual");
    for (const auto& output : fit.certificate.grams) {
      for (const auto& sign : output) grams += static_cast<int>(sign.size());
    }
  };

  const ExperimentConfig nl = Load("nonlinear-4d");
  check_sos(FitExample().sos, nl.safety, nl.gamma, "example fit");
  const nonlinear::NonlinearUncertainty U = nl.Nonlinear();
  for (int t = 0; t < 5; ++t) {
    const MatrixXd A = MatrixXd::NullaryExpr(4, 4, [&] { return 2.0 + 3.0 * unif(rng); });
    linear::MeasurementSet fit_data;
    for (const VectorXd& x :
         nonlinear::UniformBoxSamples(-0.3 * VectorXd::Ones(4), 0.3 * VectorXd::Ones(4), 8,
                                      300 + t)) {
      fit_data.Add(x, A * x + testing::FourStateG(x, nl.gamma));
    }
    check_sos(nonlinear::FitSosConstrained(fit_data, nl.safety, U), nl.safety, nl.gamma,
              "random fit " + std::to_string(t));
  }

  v.detail << sdps << " SDP solutions (min eigenvalue " << sdp_worst << "), " << grams
           << " Gram matrices (min eigenvalue " << gram_worst << ", max residual "
           << residual_worst << ")";
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, inf when none
  std::function<void(Report&)> run;
};

}  // namespace
}  // namespace safelearn

int main() {
  using namespace safelearn;
  const std::vector<Criterion> criteria = {
      {1, "linear one-step example", 10.0, LinearOnestepExample},
      {2, "impossibility detection", 5.0, ImpossibleExample},
      {3, "linear two-step example", 60.0, LinearTwostepExample},
      {4, "nonlinear exploration safety", 120.0, NonlinearSafety},
      {5, "gamma monotonicity of the initial region", kInf, GammaMonotonicity},
      {6, "constrained versus unconstrained fit", kInf, Fitting},
      {7, "oracle equivalence", 300.0, OracleEquivalence},
      {8, "certificate suite", kInf, CertificateSuite},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Report v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.Check(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.time_limit) {
      std::ostringstream limit;
      limit << "runtime over " << c.time_limit << " s";
      v.Check(false, limit.str());
    }
    failed += !v.pass;
    std::printf("[%s] %d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.str().c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
