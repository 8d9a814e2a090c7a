#include "safelearn/nonlinear_onestep.h"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace safelearn::nonlinear {

using conic::AffineExpr;
using conic::SolveStatus;
using geometry::Polyhedron;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void CheckData(int n, const MeasurementSet& data) {
  if (data.x.size() != data.y.size()) {
    throw std::invalid_argument("measurement set has unequal x and y counts");
  }
  for (int k = 0; k < data.size(); ++k) {
    if (data.x[k].size() != n || data.y[k].size() != n) {
      throw std::invalid_argument("measurement " + std::to_string(k) +
                                  " has the wrong dimension");
    }
  }
}

void CheckInput(const Polyhedron& S, const NonlinearUncertainty& U,
                const MeasurementSet& data) {
  U.Validate();
  if (S.dimension() != U.A.n) {
    throw std::invalid_argument("safety region and prior dimensions differ");
  }
  CheckData(U.A.n, data);
}

std::string VectorText(const VectorXd& v) {
  std::ostringstream out;
  out << v.transpose();
  return out.str();
}

}  // namespace

double NonlinearUncertainty::Bound(const VectorXd& x) const {
  if (d == 0) return gamma;
  return gamma * std::pow(conic::PNorm(x, p), d);
}

void NonlinearUncertainty::Validate() const {
  A.Validate();
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be a finite nonnegative number");
  }
  if (d < 0) throw std::invalid_argument("d must be nonnegative");
  if (!p.infinite && (p.den <= 0 || p.num < p.den)) {
    throw std::invalid_argument("p must be at least 1");
  }
}

namespace {

// Region constraints on x and the multipliers; the objective is left unset.
NonlinearProgram BuildRegion(const Polyhedron& S, const NonlinearUncertainty& U,
                             const MeasurementSet& data) {
  CheckInput(S, U, data);
  const int n = U.A.n, r = S.num_halfspaces(), m = data.size();
  NonlinearProgram out;
  out.layout = {n, static_cast<int>(U.A.constraints.size()), m, r};
  const NonlinearLayout& L = out.layout;
  out.x = out.program.AddVariables(n, "x");
  out.multipliers = out.program.AddVariables(r * L.per_facet(), "multipliers");
  const bool needs_norm = U.d > 0 && U.gamma > 0.0;
  if (needs_norm) {
    std::vector<AffineExpr> xs;
    for (int a = 0; a < n; ++a) xs.push_back(AffineExpr::Var(out.x[a]));
    out.t = conic::AddPnormPowerEpigraph(out.program, xs, U.p, U.d).t;
  }
  std::vector<double> beta(m);
  for (int k = 0; k < m; ++k) beta[k] = U.Bound(data.x[k]);

  std::vector<AffineExpr> rows;
  for (int i = 0; i < r; ++i) {
    rows.push_back(S.b()(i) - AffineExpr::Dot(S.H().row(i).transpose(), out.x));
  }
  std::vector<AffineExpr> eqs;
  for (int i = 0; i < r; ++i) {
    const VectorXd h = S.H().row(i).transpose();
    auto var = [&](int local) { return out.multipliers[local]; };
    AffineExpr worst;
    for (int j = 0; j < L.s; ++j) worst.AddTerm(var(L.mu(i, j)), U.A.constraints[j].v);
    for (int k = 0; k < m; ++k) {
      for (int l = 0; l < n; ++l) {
        worst.AddTerm(var(L.eta_plus(i, k, l)), beta[k] + data.y[k](l));
        worst.AddTerm(var(L.eta_minus(i, k, l)), beta[k] - data.y[k](l));
      }
    }
    const double g_weight = U.gamma * h.lpNorm<1>();
    if (needs_norm) {
      worst.AddTerm(out.t, g_weight);
    } else if (U.d == 0) {
      worst += AffineExpr(g_weight);
    }
    rows.push_back(S.b()(i) - worst);
    // x_a h_b = sum_j mu_j V_j(b, a) + sum_k (eta+_kb - eta-_kb) x_k(a)
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        AffineExpr e = AffineExpr::Var(out.x[a], -h(b));
        for (int j = 0; j < L.s; ++j) {
          const double coeff = U.A.constraints[j].V(b, a);
          if (coeff != 0.0) e.AddTerm(var(L.mu(i, j)), coeff);
        }
        for (int k = 0; k < m; ++k) {
          const double xa = data.x[k](a);
          if (xa == 0.0) continue;
          e.AddTerm(var(L.eta_plus(i, k, b)), xa);
          e.AddTerm(var(L.eta_minus(i, k, b)), -xa);
        }
        eqs.push_back(std::move(e));
      }
    }
  }
  for (int v = 0; v < out.multipliers.size; ++v) {
    rows.push_back(AffineExpr::Var(out.multipliers[v]));
  }
  out.program.AddNonnegative(std::move(rows), "region");
  out.program.AddEquality(std::move(eqs), "stationarity");
  return out;
}

}  // namespace

NonlinearProgram BuildNonlinearSocp(const Polyhedron& S, const NonlinearUncertainty& U,
                                    const MeasurementSet& data, const VectorXd& c) {
  NonlinearProgram out = BuildRegion(S, U, data);
  if (c.size() != U.A.n) throw std::invalid_argument("cost vector has the wrong length");
  out.program.SetObjective(AffineExpr::Dot(c, out.x), conic::Sense::kMinimize);
  return out;
}

geometry::LiftedProgram NonlinearRegion(const Polyhedron& S, const NonlinearUncertainty& U,
                                        const MeasurementSet& data) {
  NonlinearProgram p = BuildRegion(S, U, data);
  return {std::move(p.program), p.x};
}

NonlinearPoint MinCostNonlinearPoint(const Polyhedron& S, const NonlinearUncertainty& U,
                                     const MeasurementSet& data, const VectorXd& c,
                                     const conic::SolverSettings& settings) {
  const NonlinearProgram prog = BuildNonlinearSocp(S, U, data, c);
  const conic::Solution sol = conic::Solve(prog.program, settings);
  NonlinearPoint out;
  out.fresh_status = sol.status;
  out.iterations = sol.stats.iterations;
  if (sol.optimal()) {
    out.status = SolveStatus::kOptimal;
    out.x = sol.Value(prog.x);
    out.value = sol.objective_value;
  } else if (sol.status != SolveStatus::kInfeasible) {
    out.status = sol.status;
    return out;
  } else {
    out.status = SolveStatus::kInfeasible;
  }
  for (int k = 0; k < data.size(); ++k) {
    const double value = c.dot(data.x[k]);
    if (out.status != SolveStatus::kOptimal || value < out.value) {
      out.status = SolveStatus::kOptimal;
      out.x = data.x[k];
      out.value = value;
      out.measured_index = k;
    }
  }
  return out;
}

NonlinearWorstCase InnerNonlinearWorstCase(const NonlinearUncertainty& U,
                                           const MeasurementSet& data, const VectorXd& h,
                                           const VectorXd& x,
                                           const conic::SolverSettings& settings) {
  U.Validate();
  const int n = U.A.n, s = static_cast<int>(U.A.constraints.size()), m = data.size();
  if (h.size() != n || x.size() != n) {
    throw std::invalid_argument("InnerNonlinearWorstCase: dimension mismatch");
  }
  CheckData(n, data);
  conic::ConicProgram prog;
  const conic::VarRange mu = prog.AddVariables(s, "mu");
  const conic::VarRange ep = prog.AddVariables(m * n, "eta_plus");
  const conic::VarRange em = prog.AddVariables(m * n, "eta_minus");
  AffineExpr objective(U.Bound(x) * h.lpNorm<1>());
  std::vector<AffineExpr> nonneg;
  for (int j = 0; j < s; ++j) objective.AddTerm(mu[j], U.A.constraints[j].v);
  for (int k = 0; k < m; ++k) {
    const double beta = U.Bound(data.x[k]);
    for (int l = 0; l < n; ++l) {
      objective.AddTerm(ep[k * n + l], beta + data.y[k](l));
      objective.AddTerm(em[k * n + l], beta - data.y[k](l));
    }
  }
  for (int v = 0; v < s; ++v) nonneg.push_back(AffineExpr::Var(mu[v]));
  for (int v = 0; v < m * n; ++v) {
    nonneg.push_back(AffineExpr::Var(ep[v]));
    nonneg.push_back(AffineExpr::Var(em[v]));
  }
  std::vector<AffineExpr> eqs;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      AffineExpr e(-x(a) * h(b));
      for (int j = 0; j < s; ++j) {
        const double coeff = U.A.constraints[j].V(b, a);
        if (coeff != 0.0) e.AddTerm(mu[j], coeff);
      }
      for (int k = 0; k < m; ++k) {
        const double xa = data.x[k](a);
        if (xa == 0.0) continue;
        e.AddTerm(ep[k * n + b], xa);
        e.AddTerm(em[k * n + b], -xa);
      }
      eqs.push_back(std::move(e));
    }
  }
  if (!nonneg.empty()) prog.AddNonnegative(std::move(nonneg), "multipliers");
  prog.AddEquality(std::move(eqs), "stationarity");
  prog.SetObjective(objective, conic::Sense::kMinimize);
  const conic::Solution sol = conic::Solve(prog, settings);
  NonlinearWorstCase out;
  out.status = sol.status;
  if (sol.optimal()) {
    out.value = sol.objective_value;
    out.mu = sol.Value(mu);
    out.eta_plus = MatrixXd(m, n);
    out.eta_minus = MatrixXd(m, n);
    for (int k = 0; k < m; ++k) {
      out.eta_plus.row(k) = sol.Value(ep).segment(k * n, n).transpose();
      out.eta_minus.row(k) = sol.Value(em).segment(k * n, n).transpose();
    }
  }
  return out;
}

geometry::Polygon NonlinearRegionPolygon(const Polyhedron& S, const NonlinearUncertainty& U,
                                         const MeasurementSet& data,
                                         std::pair<int, int> dims, int K,
                                         const conic::SolverSettings& settings) {
  const geometry::LiftedProgram region = NonlinearRegion(S, U, data);
  const int n = U.A.n;
  if (dims.first < 0 || dims.first >= n || dims.second < 0 || dims.second >= n ||
      dims.first == dims.second) {
    throw std::invalid_argument("NonlinearRegionPolygon: bad coordinate pair");
  }
  auto support = [&](const Eigen::Vector2d& w) {
    VectorXd d = VectorXd::Zero(n);
    d(dims.first) = w(0);
    d(dims.second) = w(1);
    geometry::SupportResult result = geometry::Support(region, d, settings);
    if (result.status == geometry::SupportStatus::kFailed ||
        result.status == geometry::SupportStatus::kUnbounded) {
      return result;
    }
    for (const VectorXd& xk : data.x) {
      const double value = d.dot(xk);
      if (result.status == geometry::SupportStatus::kEmpty || value > result.value) {
        result.status = geometry::SupportStatus::kBounded;
        result.value = value;
        result.point = xk;
      }
    }
    return result;
  };
  return geometry::PolygonFromSupport(support, K);
}

CostSampler SphereSampler(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("SphereSampler: n must be positive");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [n, rng](int) {
    std::normal_distribution<double> normal;
    VectorXd v(n);
    do {
      for (int i = 0; i < n; ++i) v(i) = normal(*rng);
    } while (v.norm() < 1e-12);
    return VectorXd(v / v.norm());
  };
}

LearnOutcome SafeExplore(const Polyhedron& S, const NonlinearUncertainty& U,
                         const CostSampler& sampler, int steps, const Oracle& oracle,
                         const ExploreSettings& settings) {
  CheckInput(S, U, {});
  if (steps < 1) throw std::invalid_argument("SafeExplore: steps must be positive");
  const int n = U.A.n;
  LearnOutcome outcome;
  MeasurementSet data;
  for (int step = 1; step <= steps; ++step) {
    NonlinearPoint point;
    VectorXd c;
    bool accepted = false;
    for (int attempt = 0; attempt < settings.max_resamples && !accepted; ++attempt) {
      c = sampler(step);
      if (c.size() != n) throw std::invalid_argument("sampler returned the wrong length");
      point = MinCostNonlinearPoint(S, U, data, c, settings.solver);
      std::string reason;
      if (point.fresh_status != SolveStatus::kOptimal) {
        reason = "program " + conic::ToString(point.fresh_status);
      } else if (point.measured_index >= 0) {
        reason = "a measured point is cheaper";
      } else {
        for (const VectorXd& xk : data.x) {
          if ((xk - point.x).lpNorm<Eigen::Infinity>() <= settings.duplicate_tol) {
            reason = "optimum repeats a measured point";
          }
        }
      }
      if (reason.empty()) {
        accepted = true;
      } else {
        outcome.warnings.push_back("step " + std::to_string(step) +
                                   ": direction resampled, " + reason);
      }
    }
    if (!accepted) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "no new safe query after " +
                        std::to_string(settings.max_resamples) + " directions";
      return outcome;
    }
    if (!geometry::Contains(S, point.x, settings.safety_tol)) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "query outside the safety region: " + VectorText(point.x);
      return outcome;
    }
    const VectorXd y = oracle(point.x);
    if (y.size() != n) throw std::invalid_argument("oracle returned the wrong length");
    if (!geometry::Contains(S, y, settings.safety_tol)) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "safety violation: observation " + VectorText(y) +
                        " leaves the safety region";
      return outcome;
    }
    StepRecord& record = AppendStep(outcome, c, point.x, {y}, "fresh");
    record.cost_direction = c;
    record.solver_iterations = point.iterations;
    data.Add(point.x, y);
    outcome.measurements_used = data.size();
    if (settings.on_step) settings.on_step(data);
  }
  outcome.verdict = Verdict::kCompleted;
  return outcome;
}

VectorXd QuadraticVectorModel::Quadratic(const VectorXd& x) const {
  VectorXd g(G.size());
  for (size_t j = 0; j < G.size(); ++j) g(j) = x.dot(G[j] * x);
  return g;
}

VectorXd QuadraticVectorModel::Evaluate(const VectorXd& x) const {
  return A * x + Quadratic(x);
}

double QuadraticVectorModel::Loss(const MeasurementSet& data) const {
  double loss = 0.0;
  for (int k = 0; k < data.size(); ++k) {
    loss += (Evaluate(data.x[k]) - data.y[k]).squaredNorm();
  }
  return loss;
}

void QuadraticVectorModel::Write(std::ostream& out) const {
  const int n = dimension();
  out << "safelearn-quadratic-model 1\n" << "n " << n << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto block = [&](const std::string& name, const MatrixXd& M) {
    out << name << "\n";
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out << (j ? " " : "") << M(i, j);
      out << "\n";
    }
  };
  block("A", A);
  for (int j = 0; j < n; ++j) block("G " + std::to_string(j + 1), G[j]);
}

QuadraticVectorModel QuadraticVectorModel::Read(std::istream& in) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("quadratic model: " + what);
  };
  std::string magic, key;
  int version = 0, n = 0;
  if (!(in >> magic >> version) || magic != "safelearn-quadratic-model") fail("bad header");
  if (version != 1) fail("unsupported version " + std::to_string(version));
  if (!(in >> key >> n) || key != "n" || n < 1) fail("bad dimension line");
  auto block = [&](const std::string& name, int index) {
    if (!(in >> key) || key != name) fail("expected block " + name);
    if (index > 0) {
      int got = 0;
      if (!(in >> got) || got != index) fail("expected G " + std::to_string(index));
    }
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!(in >> M(i, j))) fail("truncated block " + name);
      }
    }
    return M;
  };
  QuadraticVectorModel model;
  model.A = block("A", 0);
  for (int j = 1; j <= n; ++j) model.G.push_back(block("G", j));
  return model;
}

namespace {

// (x, x_a^2, sqrt2 x_a x_b for a < b): the coefficient of sqrt2 x_a x_b is
// sqrt2 G_ab, so Euclidean norms of the weights are Frobenius norms.
VectorXd Features(const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  VectorXd f(n + n * (n + 1) / 2);
  f.head(n) = x;
  int idx = n;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      f(idx++) = a == b ? x(a) * x(a) : std::sqrt(2.0) * x(a) * x(b);
    }
  }
  return f;
}

}  // namespace

QuadraticVectorModel FitLeastSquares(const MeasurementSet& data, double rank_tol) {
  if (data.size() < 1) throw std::invalid_argument("FitLeastSquares: no data");
  const int n = static_cast<int>(data.x[0].size());
  CheckData(n, data);
  const int p = n + n * (n + 1) / 2;
  MatrixXd Phi(data.size(), p), Y(data.size(), n);
  for (int k = 0; k < data.size(); ++k) {
    Phi.row(k) = Features(data.x[k]).transpose();
    Y.row(k) = data.y[k].transpose();
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Phi);
  cod.setThreshold(rank_tol);
  const MatrixXd W = cod.solve(Y);
  QuadraticVectorModel model;
  model.A = W.topRows(n).transpose();
  for (int j = 0; j < n; ++j) {
    MatrixXd G = MatrixXd::Zero(n, n);
    int idx = n;
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        if (a == b) {
          G(a, a) = W(idx++, j);
        } else {
          G(a, b) = G(b, a) = W(idx++, j) / std::sqrt(2.0);
        }
      }
    }
    model.G.push_back(G);
  }
  return model;
}

namespace {

using Monomial = std::vector<int>;  // exponents

// Polynomial whose coefficients are affine in the decision variables.
class PolyExpr {
 public:
  explicit PolyExpr(int n) : n_(n) {}

  void Add(const Monomial& m, const AffineExpr& coeff) { terms_[m] += coeff; }

  // Monomial of basis entries (0 = constant, a + 1 = x_a).
  Monomial Basis(std::initializer_list<int> entries) const {
    Monomial m(n_, 0);
    for (int e : entries) {
      if (e > 0) ++m[e - 1];
    }
    return m;
  }

  const std::map<Monomial, AffineExpr>& terms() const { return terms_; }

 private:
  int n_;
  std::map<Monomial, AffineExpr> terms_;
};

// coefficient-wise value of sigma(x) (b - h'x) for a Gram matrix over
// (1, x_1, ..., x_n), accumulated into `poly` with sign +1.
void AddGramTimesFactor(PolyExpr& poly, int n, const std::function<AffineExpr(int, int)>& gram,
                        double b, const VectorXd* h) {
  for (int al = 0; al <= n; ++al) {
    for (int be = 0; be <= n; ++be) {
      const AffineExpr p = gram(std::max(al, be), std::min(al, be));
      poly.Add(poly.Basis({al, be}), b * p);
      if (h == nullptr) continue;
      for (int c = 0; c < n; ++c) {
        if ((*h)(c) != 0.0) poly.Add(poly.Basis({al, be, c + 1}), -(*h)(c) * p);
      }
    }
  }
}

// Coefficients of gamma + sign x'Gx - sigma_0 - sum_i sigma_i (b_i - h_i'x)
// for numeric Gram matrices.
std::map<Monomial, double> IdentityCoefficients(const MatrixXd& Gj, double sign,
                                                const std::vector<MatrixXd>& grams,
                                                const Polyhedron& S, double gamma) {
  const int n = static_cast<int>(Gj.rows());
  std::map<Monomial, double> coeffs;
  auto mono = [n](std::initializer_list<int> entries) {
    Monomial m(n, 0);
    for (int e : entries) {
      if (e > 0) ++m[e - 1];
    }
    return m;
  };
  coeffs[mono({})] += gamma;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) coeffs[mono({a + 1, b + 1})] += sign * Gj(a, b);
  }
  for (size_t i = 0; i < grams.size(); ++i) {
    const double bi = i == 0 ? 1.0 : S.b()(i - 1);
    for (int al = 0; al <= n; ++al) {
      for (int be = 0; be <= n; ++be) {
        const double p = grams[i](al, be);
        coeffs[mono({al, be})] -= bi * p;
        if (i == 0) continue;
        for (int c = 0; c < n; ++c) {
          coeffs[mono({al, be, c + 1})] += S.H()(i - 1, c) * p;
        }
      }
    }
  }
  return coeffs;
}

}  // namespace

double SosCertificate::MinEigenvalue() const {
  double lo = kInf;
  for (const auto& per_output : grams) {
    for (const auto& per_sign : per_output) {
      for (const MatrixXd& P : per_sign) {
        lo = std::min(lo, Eigen::SelfAdjointEigenSolver<MatrixXd>(P, Eigen::EigenvaluesOnly)
                              .eigenvalues()(0));
      }
    }
  }
  return lo;
}

double SosCertificate::IdentityResidual(const QuadraticVectorModel& model,
                                        const Polyhedron& S, double gamma) const {
  double worst = 0.0;
  for (size_t j = 0; j < grams.size(); ++j) {
    for (int s = 0; s < 2; ++s) {
      const auto coeffs =
          IdentityCoefficients(model.G[j], s == 0 ? 1.0 : -1.0, grams[j][s], S, gamma);
      for (const auto& [m, v] : coeffs) worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

SosFit FitSosConstrained(const MeasurementSet& data, const Polyhedron& S,
                         const NonlinearUncertainty& U,
                         const conic::SolverSettings& settings) {
  CheckInput(S, U, data);
  if (U.d != 0) {
    throw std::invalid_argument("SOS fitting supports only a constant bound (d = 0)");
  }
  const int n = U.A.n, r = S.num_halfspaces(), m = data.size();
  if (m < 1) throw std::invalid_argument("FitSosConstrained: no data");
  conic::ConicProgram prog;
  const conic::VarRange a = prog.AddVariables(n * n, "A");
  std::vector<conic::VarRange> g;
  auto gvar = [&](int j, int i, int l) {
    return g[j][conic::LowerIndex(n, std::max(i, l), std::min(i, l))];
  };
  for (int j = 0; j < n; ++j) {
    g.push_back(prog.AddVariables(n * (n + 1) / 2, "G" + std::to_string(j + 1)));
  }
  const int t = prog.AddVariables(1, "loss")[0];

  std::vector<AffineExpr> residuals, nonneg;
  for (int k = 0; k < m; ++k) {
    const VectorXd& x = data.x[k];
    for (int l = 0; l < n; ++l) {
      AffineExpr lin;
      for (int b = 0; b < n; ++b) lin.AddTerm(a[l * n + b], x(b));
      AffineExpr quad;
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q <= i; ++q) {
          quad.AddTerm(gvar(l, i, q), (i == q ? 1.0 : 2.0) * x(i) * x(q));
        }
      }
      residuals.push_back(lin + quad - data.y[k](l));
      nonneg.push_back(U.gamma - (lin - data.y[k](l)));
      nonneg.push_back(U.gamma + (lin - data.y[k](l)));
    }
  }
  for (const linear::MatrixConstraint& con : U.A.constraints) {
    AffineExpr e(con.v);
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < n; ++b) {
        if (con.V(i, b) != 0.0) e.AddTerm(a[i * n + b], -con.V(i, b));
      }
    }
    nonneg.push_back(std::move(e));
  }
  prog.AddNonnegative(std::move(nonneg), "prior");
  prog.AddRotatedSecondOrderCone(AffineExpr::Var(t), AffineExpr(0.5), std::move(residuals),
                                 "loss");

  SosCertificate cert;
  std::vector<std::vector<std::vector<conic::VarRange>>> gram_vars(n);
  for (int j = 0; j < n; ++j) {
    gram_vars[j].resize(2);
    for (int s = 0; s < 2; ++s) {
      const double sign = s == 0 ? 1.0 : -1.0;
      PolyExpr poly(n);
      // gamma + sign x'G_j x
      poly.Add(poly.Basis({}), AffineExpr(-U.gamma));
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q < n; ++q) {
          poly.Add(poly.Basis({i + 1, q + 1}), AffineExpr::Var(gvar(j, i, q), -sign));
        }
      }
      for (int i = 0; i <= r; ++i) {
        const conic::VarRange P =
            prog.AddPsdVariable(n + 1, "sigma_" + std::to_string(j + 1) +
                                           (s == 0 ? "+" : "-") + std::to_string(i))
                .first;
        gram_vars[j][s].push_back(P);
        auto entry = [&](int row, int col) {
          return AffineExpr::Var(P[conic::LowerIndex(n + 1, row, col)]);
        };
        if (i == 0) {
          AddGramTimesFactor(poly, n, entry, 1.0, nullptr);
        } else {
          const VectorXd h = S.H().row(i - 1).transpose();
          AddGramTimesFactor(poly, n, entry, S.b()(i - 1), &h);
        }
      }
      std::vector<AffineExpr> eqs;
      for (const auto& [mono, coeff] : poly.terms()) {
        if (!coeff.terms().empty() || coeff.constant() != 0.0) eqs.push_back(coeff);
      }
      prog.AddEquality(std::move(eqs), "identity_" + std::to_string(j + 1) +
                                           (s == 0 ? "+" : "-"));
    }
  }
  prog.SetObjective(AffineExpr::Var(t), conic::Sense::kMinimize);

  const conic::Solution sol = conic::Solve(prog, settings);
  SosFit fit;
  fit.status = sol.status;
  fit.iterations = sol.stats.iterations;
  if (!sol.optimal()) return fit;
  fit.model.A = linear::Unvec(sol.Value(a), n);
  for (int j = 0; j < n; ++j) {
    MatrixXd G(n, n);
    for (int i = 0; i < n; ++i) {
      for (int q = 0; q < n; ++q) G(i, q) = sol.Value(gvar(j, i, q));
    }
    fit.model.G.push_back(G);
  }
  cert.grams.resize(n);
  for (int j = 0; j < n; ++j) {
    cert.grams[j].resize(2);
    for (int s = 0; s < 2; ++s) {
      for (const conic::VarRange& P : gram_vars[j][s]) {
        cert.grams[j][s].push_back(conic::LowerToMatrix(sol.Value(P), n + 1));
      }
    }
  }
  fit.certificate = std::move(cert);
  fit.loss = fit.model.Loss(data);
  return fit;
}

double Rmse(const QuadraticVectorModel& model, const Oracle& truth,
            const std::vector<VectorXd>& test_points) {
  if (test_points.empty()) throw std::invalid_argument("Rmse: empty test set");
  double total = 0.0;
  for (const VectorXd& z : test_points) {
    total += (model.Evaluate(z) - truth(z)).squaredNorm();
  }
  return std::sqrt(total / test_points.size());
}

std::vector<VectorXd> UniformBoxSamples(const VectorXd& lower, const VectorXd& upper,
                                        int count, std::uint64_t seed) {
  if (lower.size() != upper.size() || (lower.array() > upper.array()).any()) {
    throw std::invalid_argument("UniformBoxSamples: bad box");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    VectorXd x(lower.size());
    for (int i = 0; i < x.size(); ++i) x(i) = lower(i) + (upper(i) - lower(i)) * unit(rng);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace safelearn::nonlinear
