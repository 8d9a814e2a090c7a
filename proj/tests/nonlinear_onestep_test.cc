#include "safelearn/nonlinear_onestep.h"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "instances.h"

namespace safelearn::nonlinear {
namespace {

using conic::SolveStatus;
using geometry::Polyhedron;
using linear::MatrixPolytope;
using linear::MeasurementSet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

NonlinearUncertainty FourStatePrior(double gamma) {
  NonlinearUncertainty U;
  U.A = MatrixPolytope::EntrywiseBox(MatrixXd::Constant(4, 4, -4.0),
                                     MatrixXd::Constant(4, 4, 8.0));
  U.gamma = gamma;
  return U;
}

Oracle FourStateTruth(double gamma) {
  const MatrixXd A = safelearn::testing::FourStateAStar();
  return [A, gamma](const VectorXd& x) {
    return VectorXd(A * x + safelearn::testing::FourStateG(x, gamma));
  };
}

double SolveValue(const conic::ConicProgram& program,
                  const conic::SolverSettings& settings = {}) {
  const conic::Solution sol = conic::Solve(program, settings);
  EXPECT_EQ(sol.status, SolveStatus::kOptimal);
  return sol.objective_value;
}

TEST(NonlinearUncertaintyTest, BoundAndValidation) {
  NonlinearUncertainty U = FourStatePrior(0.5);
  EXPECT_DOUBLE_EQ(U.Bound(VectorXd::Zero(4)), 0.5);
  U.d = 2;
  U.p = conic::NormOrder::Rational(2, 1);
  EXPECT_NEAR(U.Bound(Eigen::Vector4d(3, 4, 0, 0)), 12.5, 1e-12);
  U.gamma = -1.0;
  EXPECT_THROW(U.Validate(), std::invalid_argument);
}

TEST(BuildNonlinearSocpTest, ScalarExample) {
  // Worst case 2|x| + 0.5 <= 1.
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(1, 2.0);
  U.gamma = 0.5;
  const NonlinearPoint p = MinCostNonlinearPoint(Polyhedron::Box(1, -1.0, 1.0), U, {},
                                                 VectorXd::Constant(1, -1.0));
  ASSERT_EQ(p.status, SolveStatus::kOptimal);
  EXPECT_EQ(p.measured_index, -1);
  EXPECT_NEAR(p.x(0), 0.25, 1e-6);
  EXPECT_NEAR(p.value, -0.25, 1e-6);
}

TEST(BuildNonlinearSocpTest, FourStateRegionShrinksWithGamma) {
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const VectorXd c = -VectorXd::Unit(4, 0);
  std::vector<double> values;
  for (double gamma : {0.0, 0.4, 0.8}) {
    const NonlinearPoint p = MinCostNonlinearPoint(S, FourStatePrior(gamma), {}, c);
    ASSERT_EQ(p.status, SolveStatus::kOptimal);
    values.push_back(p.value);
  }
  // min over 8 x1+ + 4 x1- + gamma <= 1 and 4 x1+ + 8 x1- + gamma <= 1
  EXPECT_NEAR(values[0], -0.125, 1e-6);
  EXPECT_NEAR(values[1], -0.075, 1e-6);
  EXPECT_NEAR(values[2], -0.025, 1e-6);
}

TEST(BuildNonlinearSocpTest, NormPowerBoundIsConic) {
  // |a| <= 1 and |g(x)| <= 0.5 x^2 on [-1, 1]: x + 0.5 x^2 <= 1.
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(1, 1.0);
  U.gamma = 0.5;
  U.d = 2;
  U.p = conic::NormOrder::Rational(2, 1);
  const NonlinearProgram prog = BuildNonlinearSocp(Polyhedron::Box(1, -1.0, 1.0), U, {},
                                                   VectorXd::Constant(1, -1.0));
  EXPECT_TRUE(prog.program.HasSecondOrder());
  EXPECT_GE(prog.t, 0);
  EXPECT_NEAR(SolveValue(prog.program, conic::SolverSettings::Conic()),
              -(std::sqrt(3.0) - 1.0), 1e-6);
}

TEST(MinCostNonlinearPointTest, MeasuredPointWinsWhenCheaper) {
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(1, 2.0);
  U.gamma = 0.9;
  MeasurementSet data;
  data.Add(VectorXd::Constant(1, 0.5), VectorXd::Constant(1, 0.5));
  const NonlinearPoint p = MinCostNonlinearPoint(Polyhedron::Box(1, -1.0, 1.0), U, data,
                                                 VectorXd::Constant(1, -1.0));
  ASSERT_EQ(p.status, SolveStatus::kOptimal);
  EXPECT_EQ(p.fresh_status, SolveStatus::kOptimal);
  EXPECT_EQ(p.measured_index, 0);
  EXPECT_DOUBLE_EQ(p.x(0), 0.5);
}

TEST(MinCostNonlinearPointTest, EmptyProgramFallsBackToData) {
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(1, 2.0);
  U.gamma = 1.5;  // no fresh point survives
  const Polyhedron S = Polyhedron::Box(1, -1.0, 1.0);
  const VectorXd c = VectorXd::Constant(1, 1.0);
  EXPECT_EQ(MinCostNonlinearPoint(S, U, {}, c).status, SolveStatus::kInfeasible);
  MeasurementSet data;
  data.Add(VectorXd::Constant(1, 0.1), VectorXd::Constant(1, 0.2));
  const NonlinearPoint p = MinCostNonlinearPoint(S, U, data, c);
  EXPECT_EQ(p.status, SolveStatus::kOptimal);
  EXPECT_EQ(p.fresh_status, SolveStatus::kInfeasible);
  EXPECT_EQ(p.measured_index, 0);
}

// Random planar instance: polytope S containing the origin, entrywise box
// prior containing A*, and measurements at random points of S.
struct Instance {
  Polyhedron S;
  MatrixPolytope U0;
  MatrixXd A_star;
  MeasurementSet data;
  VectorXd c;
};

Instance RandomInstance(std::mt19937_64& rng, int max_data) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0), offset(0.3, 1.5);
  const int r = 3 + static_cast<int>(rng() % 4);
  MatrixXd H(r, 2);
  VectorXd b(r);
  for (int i = 0; i < r; ++i) {
    const double angle = 2.0 * M_PI * (i + 0.4 * unif(rng)) / r;
    H.row(i) << std::cos(angle), std::sin(angle);
    b(i) = offset(rng);
  }
  Instance inst{Polyhedron(H, b), {}, MatrixXd(2, 2), {}, VectorXd(2)};
  MatrixXd lo(2, 2), hi(2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double center = unif(rng), width = 0.1 + std::abs(unif(rng));
      lo(i, j) = center - width;
      hi(i, j) = center + width;
      inst.A_star(i, j) = center + 0.8 * width * unif(rng);
    }
  }
  inst.U0 = MatrixPolytope::EntrywiseBox(lo, hi);
  const int m = static_cast<int>(rng() % (max_data + 1));
  for (int k = 0; k < m; ++k) {
    const VectorXd x = 0.3 * Eigen::Vector2d(unif(rng), unif(rng));
    inst.data.Add(x, inst.A_star * x);
  }
  inst.c = Eigen::Vector2d(unif(rng), unif(rng));
  return inst;
}

TEST(NonlinearSocpPropertyTest, ZeroGammaMatchesLinearProgram) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 60; ++t) {
    const Instance inst = RandomInstance(rng, 3);
    NonlinearUncertainty U;
    U.A = inst.U0;
    const NonlinearProgram socp = BuildNonlinearSocp(inst.S, U, inst.data, inst.c);
    const linear::OnestepLp lp = linear::BuildOnestepLp(inst.S, inst.U0, inst.data, inst.c);
    const conic::Solution a = conic::Solve(socp.program);
    const conic::Solution b = conic::Solve(lp.program);
    ASSERT_EQ(a.status, b.status) << t;
    if (a.optimal()) EXPECT_NEAR(a.objective_value, b.objective_value, 1e-7) << t;
  }
}

TEST(NonlinearSocpPropertyTest, RegionShrinksAsGammaGrows) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 10; ++t) {
    const Instance inst = RandomInstance(rng, 2);
    for (int dir = 0; dir < 16; ++dir) {
      const VectorXd c = Eigen::Vector2d(std::cos(dir * M_PI / 8), std::sin(dir * M_PI / 8));
      double previous = -1e300;
      for (double gamma : {0.0, 0.05, 0.1, 0.2}) {
        NonlinearUncertainty U;
        U.A = inst.U0;
        U.gamma = gamma;
        const conic::Solution sol =
            conic::Solve(BuildNonlinearSocp(inst.S, U, inst.data, c).program);
        if (sol.status == SolveStatus::kInfeasible) {
          previous = 1e300;
          continue;
        }
        ASSERT_EQ(sol.status, SolveStatus::kOptimal) << t << " " << gamma;
        EXPECT_GE(sol.objective_value, previous - 1e-7) << t << " " << gamma;
        previous = sol.objective_value;
      }
    }
  }
}

TEST(InnerNonlinearWorstCaseTest, BoundsSampledConsistentSystems) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 10; ++t) {
    Instance inst = RandomInstance(rng, 2);
    NonlinearUncertainty U;
    U.A = inst.U0;
    U.gamma = 0.05;
    // Observations of A* x + g*(x) with a bounded g*.
    for (int k = 0; k < inst.data.size(); ++k) {
      inst.data.y[k] += U.gamma * Eigen::Vector2d(unif(rng), unif(rng));
    }
    const VectorXd x = 0.4 * Eigen::Vector2d(unif(rng), unif(rng));
    for (int i = 0; i < inst.S.num_halfspaces(); ++i) {
      const VectorXd h = inst.S.H().row(i).transpose();
      const NonlinearWorstCase worst = InnerNonlinearWorstCase(U, inst.data, h, x);
      ASSERT_EQ(worst.status, SolveStatus::kOptimal) << t;
      for (int s = 0; s < 1000; ++s) {
        MatrixXd A = inst.A_star + 0.5 * MatrixXd::NullaryExpr(
                                             2, 2, [&](Eigen::Index, Eigen::Index) { return unif(rng); });
        if (inst.U0.MaxViolation(A) > 0.0) continue;
        bool consistent = true;
        for (int k = 0; k < inst.data.size(); ++k) {
          consistent &= (A * inst.data.x[k] - inst.data.y[k]).lpNorm<Eigen::Infinity>() <=
                        U.gamma;
        }
        if (!consistent) continue;
        const VectorXd g = U.gamma * Eigen::Vector2d(unif(rng), unif(rng));
        EXPECT_LE(h.dot(A * x + g), worst.value + 1e-5) << t;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(InnerNonlinearWorstCaseTest, MatchesPrimalProgram) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Instance inst = RandomInstance(rng, 3);
    NonlinearUncertainty U;
    U.A = inst.U0;
    U.gamma = 0.1;
    const VectorXd x = 0.5 * Eigen::Vector2d(unif(rng), unif(rng));
    const VectorXd h = inst.S.H().row(0).transpose();
    // max h'A x over the prior and |A x_k - y_k| <= gamma, plus gamma |h|_1.
    conic::ConicProgram primal;
    const conic::VarRange a = primal.AddVariables(4);
    std::vector<conic::AffineExpr> rows;
    for (const auto& con : inst.U0.constraints) {
      rows.push_back(con.v - conic::AffineExpr::Dot(linear::Vec(con.V), a));
    }
    for (int k = 0; k < inst.data.size(); ++k) {
      for (int l = 0; l < 2; ++l) {
        VectorXd row = VectorXd::Zero(4);
        row.segment(2 * l, 2) = inst.data.x[k];
        const conic::AffineExpr e = conic::AffineExpr::Dot(row, a) - inst.data.y[k](l);
        rows.push_back(U.gamma - e);
        rows.push_back(U.gamma + e);
      }
    }
    primal.AddNonnegative(rows);
    primal.SetObjective(conic::AffineExpr::Dot(linear::Vec(h * x.transpose()), a),
                        conic::Sense::kMaximize);
    const conic::Solution sol = conic::Solve(primal);
    ASSERT_EQ(sol.status, SolveStatus::kOptimal);
    const NonlinearWorstCase worst = InnerNonlinearWorstCase(U, inst.data, h, x);
    ASSERT_EQ(worst.status, SolveStatus::kOptimal);
    EXPECT_NEAR(worst.value, sol.objective_value + U.gamma * h.lpNorm<1>(), 1e-6) << t;
  }
}

TEST(NonlinearRegionPolygonTest, IncludesMeasuredPoints) {
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(2, 2.0);
  U.gamma = 0.9;
  MeasurementSet data;
  data.Add(Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.5, 0.0));
  const geometry::Polygon poly =
      NonlinearRegionPolygon(Polyhedron::Box(2, -1.0, 1.0), U, data, {0, 1}, 16);
  ASSERT_FALSE(poly.empty);
  EXPECT_TRUE(poly.Contains(Eigen::Vector2d(0.5, 0.0), 1e-9));
}

TEST(SafeExploreTest, SingletonPriorReducesToLinearProgram) {
  const MatrixXd A_star = safelearn::testing::FourStateAStar();
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Singleton(A_star);
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const VectorXd c = -VectorXd::Unit(4, 0);
  const LearnOutcome out = SafeExplore(
      S, U, [c](int) { return c; }, 1, [&](const VectorXd& x) { return VectorXd(A_star * x); });
  ASSERT_EQ(out.verdict, Verdict::kCompleted) << out.message;
  ASSERT_EQ(out.steps.size(), 1u);
  const linear::CostBound known = linear::CostLowerBound(S, A_star, c, 1);
  EXPECT_NEAR(out.steps[0].cost, known.value, 1e-6);
  EXPECT_EQ(out.steps[0].cost_direction, c);
}

TEST(SafeExploreTest, RepeatedOptimumIsResampledThenAborts) {
  const MatrixXd A_star = safelearn::testing::FourStateAStar();
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Singleton(A_star);
  const VectorXd c = -VectorXd::Unit(4, 0);
  ExploreSettings settings;
  settings.max_resamples = 3;
  const LearnOutcome out = SafeExplore(
      Polyhedron::Box(4, -1.0, 1.0), U, [c](int) { return c; }, 2,
      [&](const VectorXd& x) { return VectorXd(A_star * x); }, settings);
  EXPECT_EQ(out.verdict, Verdict::kAborted);
  EXPECT_EQ(out.steps.size(), 1u);
  EXPECT_EQ(out.warnings.size(), 3u);
}

TEST(SafeExploreTest, AbortsOnUnsafeObservation) {
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(1, 2.0);
  U.gamma = 0.1;
  const LearnOutcome out =
      SafeExplore(Polyhedron::Box(1, -1.0, 1.0), U, SphereSampler(1, 3), 5,
                  [](const VectorXd& x) { return VectorXd(10.0 * x); });
  EXPECT_EQ(out.verdict, Verdict::kAborted);
  EXPECT_NE(out.message.find("safety violation"), std::string::npos);
}

TEST(SafeExplorePropertyTest, FourStateRunIsSafeAndRegionsGrow) {
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const NonlinearUncertainty U = FourStatePrior(0.1);
  std::vector<geometry::Polygon> polygons;
  polygons.push_back(NonlinearRegionPolygon(S, U, {}, {0, 1}, 16));
  ExploreSettings settings;
  settings.on_step = [&](const MeasurementSet& data) {
    polygons.push_back(NonlinearRegionPolygon(S, U, data, {0, 1}, 16));
  };
  const LearnOutcome out =
      SafeExplore(S, U, SphereSampler(4, 11), 10, FourStateTruth(0.1), settings);
  ASSERT_EQ(out.verdict, Verdict::kCompleted) << out.message;
  ASSERT_EQ(out.steps.size(), 10u);
  MeasurementSet data;
  for (const StepRecord& step : out.steps) {
    EXPECT_LE((S.H() * step.x - S.b()).maxCoeff(), 1e-6);
    EXPECT_LE((S.H() * step.observations[0] - S.b()).maxCoeff(), 1e-6);
    EXPECT_NEAR(step.cost_direction.norm(), 1.0, 1e-12);
    data.Add(step.x, step.observations[0]);
  }
  for (size_t k = 1; k < polygons.size(); ++k) {
    EXPECT_TRUE(polygons[k].ContainsPolygon(polygons[k - 1], 1e-6)) << k;
  }
  // Cheapest value over a fixed direction never rises with more data.
  const VectorXd c = Eigen::Vector4d(-1.0, 0.5, 0.2, 0.0);
  double previous = 1e300;
  for (int k = 0; k <= data.size(); ++k) {
    const NonlinearPoint p = MinCostNonlinearPoint(S, U, data.Prefix(k), c);
    ASSERT_EQ(p.status, SolveStatus::kOptimal);
    EXPECT_LE(p.value, previous + 1e-7);
    previous = p.value;
  }
}

TEST(SafeExploreTest, SeedReproducesRun) {
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const NonlinearUncertainty U = FourStatePrior(0.1);
  const LearnOutcome a = SafeExplore(S, U, SphereSampler(4, 5), 4, FourStateTruth(0.1));
  const LearnOutcome b = SafeExplore(S, U, SphereSampler(4, 5), 4, FourStateTruth(0.1));
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (size_t k = 0; k < a.steps.size(); ++k) EXPECT_EQ(a.steps[k].x, b.steps[k].x);
}

TEST(QuadraticVectorModelTest, EvaluateAndRoundTrip) {
  QuadraticVectorModel model;
  model.A = MatrixXd::Identity(2, 2);
  model.G = {MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)};
  model.G[1](0, 1) = model.G[1](1, 0) = 0.5;
  EXPECT_EQ(model.Evaluate(Eigen::Vector2d(1, 2)), Eigen::Vector2d(6, 4));
  model.A(0, 1) = 1.0 / 3.0;
  std::stringstream buffer;
  model.Write(buffer);
  const QuadraticVectorModel back = QuadraticVectorModel::Read(buffer);
  EXPECT_EQ(back.A, model.A);
  EXPECT_EQ(back.G[1], model.G[1]);
  std::stringstream bad("safelearn-quadratic-model 2\n");
  EXPECT_THROW(QuadraticVectorModel::Read(bad), std::runtime_error);
}

TEST(FitLeastSquaresTest, RecoversQuadraticData) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  QuadraticVectorModel truth;
  truth.A = MatrixXd::NullaryExpr(2, 2, [&](Eigen::Index, Eigen::Index) { return unif(rng); });
  for (int j = 0; j < 2; ++j) {
    MatrixXd G = MatrixXd::NullaryExpr(2, 2, [&](Eigen::Index, Eigen::Index) { return unif(rng); });
    truth.G.push_back(0.5 * (G + G.transpose()));
  }
  MeasurementSet data;
  for (int k = 0; k < 12; ++k) {
    const VectorXd x = Eigen::Vector2d(unif(rng), unif(rng));
    data.Add(x, truth.Evaluate(x));
  }
  const QuadraticVectorModel fit = FitLeastSquares(data);
  EXPECT_LT(fit.Loss(data), 1e-20);
  EXPECT_LT((fit.A - truth.A).norm(), 1e-9);
  for (int j = 0; j < 2; ++j) EXPECT_LT((fit.G[j] - truth.G[j]).norm(), 1e-9);
  EXPECT_LT((fit.G[0] - fit.G[0].transpose()).norm(), 1e-15);
}

TEST(FitLeastSquaresTest, InterpolatesSinglePoint) {
  MeasurementSet data;
  data.Add(Eigen::Vector2d(0.3, -0.7), Eigen::Vector2d(1.0, 2.0));
  const QuadraticVectorModel fit = FitLeastSquares(data);
  EXPECT_LT((fit.Evaluate(data.x[0]) - data.y[0]).norm(), 1e-12);
}

MeasurementSet FourStateTrainingData(std::uint64_t seed) {
  const LearnOutcome out = SafeExplore(Polyhedron::Box(4, -1.0, 1.0), FourStatePrior(0.1),
                                       SphereSampler(4, seed), 8, FourStateTruth(0.1));
  EXPECT_EQ(out.verdict, Verdict::kCompleted);
  MeasurementSet data;
  for (const StepRecord& step : out.steps) data.Add(step.x, step.observations[0]);
  return data;
}

TEST(FitLeastSquaresTest, InterpolatesFourStateData) {
  const MeasurementSet data = FourStateTrainingData(51);
  EXPECT_LT(FitLeastSquares(data).Loss(data), 1e-10);
}

TEST(FitSosConstrainedTest, FourStateCertificate) {
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const MeasurementSet data = FourStateTrainingData(51);
  const SosFit fit = FitSosConstrained(data, S, FourStatePrior(0.1));
  ASSERT_EQ(fit.status, SolveStatus::kOptimal);
  EXPECT_GE(fit.certificate.MinEigenvalue(), -1e-8);
  EXPECT_LE(fit.certificate.IdentityResidual(fit.model, S, 0.1), 1e-7);
  ASSERT_EQ(fit.certificate.grams.size(), 4u);
  EXPECT_EQ(fit.certificate.grams[0][1].size(), 9u);
  for (const VectorXd& z : UniformBoxSamples(-VectorXd::Ones(4), VectorXd::Ones(4), 1000, 3)) {
    EXPECT_LE(fit.model.Quadratic(z).lpNorm<Eigen::Infinity>(), 0.1 + 1e-6);
  }
  EXPECT_LE(FourStatePrior(0.1).A.MaxViolation(fit.model.A), 1e-7);
  for (int k = 0; k < data.size(); ++k) {
    EXPECT_LE((fit.model.A * data.x[k] - data.y[k]).lpNorm<Eigen::Infinity>(), 0.1 + 1e-7);
  }
}

TEST(FitSosConstrainedTest, LooseBoundMatchesLeastSquaresLoss) {
  MeasurementSet data;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const MatrixXd A(MatrixXd::Identity(2, 2) * 0.5);
  for (int k = 0; k < 6; ++k) {
    const VectorXd x = Eigen::Vector2d(unif(rng), unif(rng));
    data.Add(x, A * x + Eigen::Vector2d(x(0) * x(1), unif(rng) * 0.1));
  }
  NonlinearUncertainty U;
  U.A = MatrixPolytope::Bounded(2, 10.0);
  U.gamma = 10.0;
  const Polyhedron S = Polyhedron::Box(2, -1.0, 1.0);
  const SosFit fit = FitSosConstrained(data, S, U);
  ASSERT_EQ(fit.status, SolveStatus::kOptimal);
  EXPECT_NEAR(fit.loss, FitLeastSquares(data).Loss(data), 1e-6);
}

TEST(FitSosConstrainedTest, UnreachableObservationIsInfeasible) {
  MeasurementSet data;
  data.Add(0.1 * VectorXd::Unit(4, 0), Eigen::Vector4d(5.0, 0.0, 0.0, 0.0));
  const SosFit fit =
      FitSosConstrained(data, Polyhedron::Box(4, -1.0, 1.0), FourStatePrior(0.1));
  EXPECT_EQ(fit.status, SolveStatus::kInfeasible);
}

TEST(FitSosConstrainedTest, RejectsNonconstantBound) {
  NonlinearUncertainty U = FourStatePrior(0.1);
  U.d = 1;
  MeasurementSet data;
  data.Add(VectorXd::Zero(4), VectorXd::Zero(4));
  EXPECT_THROW(FitSosConstrained(data, Polyhedron::Box(4, -1.0, 1.0), U),
               std::invalid_argument);
}

TEST(RmseTest, Examples) {
  QuadraticVectorModel model;
  model.A = MatrixXd::Identity(2, 2);
  model.G = {MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  const std::vector<VectorXd> test =
      UniformBoxSamples(-VectorXd::Ones(2), VectorXd::Ones(2), 50, 1);
  EXPECT_EQ(Rmse(model, [](const VectorXd& x) { return x; }, test), 0.0);
  EXPECT_NEAR(Rmse(model, [](const VectorXd& x) { return VectorXd(x - 0.25 * VectorXd::Unit(2, 0)); },
                   test),
              0.25, 1e-12);
  EXPECT_THROW(Rmse(model, [](const VectorXd& x) { return x; }, {}), std::invalid_argument);
}

TEST(FitPropertyTest, ConstrainedFitGeneralizesBetter) {
  // Systems inside the class, with training points spanning the state space.
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Polyhedron S = Polyhedron::Box(4, -1.0, 1.0);
  const NonlinearUncertainty U = FourStatePrior(0.1);
  for (int t = 0; t < 5; ++t) {
    const MatrixXd A = MatrixXd::NullaryExpr(
        4, 4, [&](Eigen::Index, Eigen::Index) { return 2.0 + 3.0 * unif(rng); });
    const Oracle truth = [&A](const VectorXd& x) {
      return VectorXd(A * x + safelearn::testing::FourStateG(x, 0.1));
    };
    MeasurementSet data;
    for (const VectorXd& x : UniformBoxSamples(-0.3 * VectorXd::Ones(4), 0.3 * VectorXd::Ones(4),
                                               8, 100 + t)) {
      data.Add(x, truth(x));
    }
    const SosFit sos = FitSosConstrained(data, S, U);
    ASSERT_EQ(sos.status, SolveStatus::kOptimal) << t;
    const std::vector<VectorXd> test =
        UniformBoxSamples(-VectorXd::Ones(4), VectorXd::Ones(4), 1000, 200 + t);
    EXPECT_LT(Rmse(sos.model, truth, test), Rmse(FitLeastSquares(data), truth, test)) << t;
  }
}

}  // namespace
}  // namespace safelearn::nonlinear
