#include "safelearn/linear_twostep.h"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "safelearn/linear_onestep.h"

namespace safelearn::linear {

using conic::AffineExpr;
using conic::QuadraticForm;
using conic::SolveStatus;
using geometry::Polyhedron;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

EllipsoidalUncertainty EllipsoidalUncertainty::FrobeniusBall(const MatrixXd& A0,
                                                            double gamma) {
  if (A0.rows() != A0.cols()) throw std::invalid_argument("FrobeniusBall: A0 not square");
  if (!(gamma >= 0.0)) throw std::invalid_argument("FrobeniusBall: gamma must be >= 0");
  EllipsoidalUncertainty U;
  U.n = static_cast<int>(A0.rows());
  const VectorXd a0 = Vec(A0);
  U.q.Q = MatrixXd::Identity(a0.size(), a0.size());
  U.q.q = -2.0 * a0;
  U.q.r = a0.squaredNorm() - gamma * gamma;
  return U;
}

double EllipsoidalUncertainty::Evaluate(const MatrixXd& A) const {
  return q.Evaluate(Vec(A));
}

void EllipsoidalUncertainty::Validate() const {
  if (n < 1 || q.dimension() != n * n) {
    throw std::invalid_argument("ellipsoidal prior must be a form over n^2 entries");
  }
  q.Validate(1e-9);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q.Q, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()(0) > 0.0)) {
    throw std::invalid_argument("ellipsoidal prior is not strictly convex");
  }
}

MatrixXd AffineSubspaceParam::Map(const VectorXd& a) const {
  if (a.size() != dimension()) throw std::invalid_argument("Map: wrong coordinate count");
  MatrixXd A = anchor;
  for (int i = 0; i < dimension(); ++i) A += a(i) * basis[i];
  return A;
}

MatrixXd AffineSubspaceParam::VecBasis() const {
  MatrixXd B(anchor.size(), dimension());
  for (int i = 0; i < dimension(); ++i) B.col(i) = Vec(basis[i]);
  return B;
}

SubspaceResult ConsistentSubspace(const TwoStepData& data, int n, double tol) {
  const int nn = n * n, k = static_cast<int>(data.size());
  SubspaceResult out;
  if (k == 0) {
    out.consistent = true;
    out.param.anchor = MatrixXd::Zero(n, n);
    for (int i = 0; i < nn; ++i) out.param.basis.push_back(Unvec(VectorXd::Unit(nn, i), n));
    return out;
  }
  MatrixXd M = MatrixXd::Zero(2 * n * k, nn);
  VectorXd rhs(2 * n * k);
  for (int j = 0; j < k; ++j) {
    const Trajectory& t = data[j];
    if (t.x.size() != n || t.y.size() != n || t.z.size() != n) {
      throw std::invalid_argument("trajectory " + std::to_string(j) +
                                  " has the wrong dimension");
    }
    for (int l = 0; l < n; ++l) {
      M.row(2 * n * j + l).segment(l * n, n) = t.x.transpose();
      rhs(2 * n * j + l) = t.y(l);
      M.row(2 * n * j + n + l).segment(l * n, n) = t.y.transpose();
      rhs(2 * n * j + n + l) = t.z(l);
    }
  }
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double cut = 1e-9 * std::max(1.0, sv(0));
  int rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  VectorXd anchor = VectorXd::Zero(nn);
  for (int i = 0; i < rank; ++i) {
    anchor += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / sv(i));
  }
  out.residual = (M * anchor - rhs).norm() / std::max(1.0, rhs.norm());
  out.consistent = out.residual <= tol;
  out.param.anchor = Unvec(anchor, n);
  for (int i = rank; i < nn; ++i) {
    out.param.basis.push_back(Unvec(svd.matrixV().col(i), n));
  }
  return out;
}

QuadraticForm Restrict(const QuadraticForm& q, const AffineSubspaceParam& g) {
  const MatrixXd B = g.VecBasis();
  const VectorXd a0 = Vec(g.anchor);
  QuadraticForm out;
  out.Q = B.transpose() * q.Q * B;
  out.Q = 0.5 * (out.Q + out.Q.transpose()).eval();
  out.q = B.transpose() * (2.0 * q.Q * a0 + q.q);
  out.r = q.Evaluate(a0);
  return out;
}

StrictPoint CheckStrictInterior(const QuadraticForm& qhat, double strict_tol) {
  StrictPoint out;
  if (qhat.dimension() == 0) {
    out.a_bar = VectorXd(0);
    out.value = qhat.r;
    return out;
  }
  Eigen::LLT<MatrixXd> llt(qhat.Q);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("CheckStrictInterior: form is not strictly convex");
  }
  out.a_bar = -0.5 * llt.solve(qhat.q);
  out.value = qhat.Evaluate(out.a_bar);
  out.strict = out.value < -strict_tol;
  return out;
}

QuadraticForm FacetForms::First(const VectorXd& x) const {
  QuadraticForm f;
  f.Q = MatrixXd::Zero(C1.rows(), C1.rows());
  f.q = C1 * x;
  f.r = d1.dot(x) - b;
  return f;
}

QuadraticForm FacetForms::Second(const VectorXd& x) const {
  QuadraticForm f;
  f.Q = MatrixXd::Zero(C2.rows(), C2.rows());
  for (int j = 0; j < x.size(); ++j) f.Q += x(j) * W[j];
  f.q = C2 * x;
  f.r = d2.dot(x) - b;
  return f;
}

FacetForms BuildFacetForms(const AffineSubspaceParam& g, const VectorXd& h, double b) {
  const int m = g.dimension(), n = static_cast<int>(g.anchor.rows());
  FacetForms f;
  f.b = b;
  const RowVectorXd ht = h.transpose();
  f.C1.resize(m, n);
  f.C2.resize(m, n);
  std::vector<RowVectorXd> hA(m);
  for (int i = 0; i < m; ++i) {
    hA[i] = ht * g.basis[i];
    f.C1.row(i) = hA[i];
    f.C2.row(i) = ht * (g.anchor * g.basis[i] + g.basis[i] * g.anchor);
  }
  f.d1 = ht * g.anchor;
  f.d2 = ht * g.anchor * g.anchor;
  f.W.assign(n, MatrixXd::Zero(m, m));
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < m; ++l) {
      const RowVectorXd w = hA[i] * g.basis[l];
      for (int j = 0; j < n; ++j) {
        f.W[j](i, l) += 0.5 * w(j);
        f.W[j](l, i) += 0.5 * w(j);
      }
    }
  }
  return f;
}

QuadraticForm CertificateForm(double lambda, const QuadraticForm& qhat,
                              const QuadraticForm& form) {
  QuadraticForm out;
  out.Q = lambda * qhat.Q - form.Q;
  out.q = lambda * qhat.q - form.q;
  out.r = lambda * qhat.r - form.r;
  return out;
}

namespace {

// lambda * qhat - (sum_j x_j Qx[j], Cx, d x - b) as an affine form.
conic::AffineQuadraticForm CertificateExpr(int lambda, const QuadraticForm& qhat,
                                           const std::vector<MatrixXd>* Qx,
                                           const MatrixXd& C, const RowVectorXd& d,
                                           double b, const conic::VarRange& x) {
  const int m = qhat.dimension();
  conic::AffineQuadraticForm f(m);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l <= i; ++l) {
      AffineExpr e = AffineExpr::Var(lambda, qhat.Q(i, l));
      if (Qx != nullptr) {
        for (int j = 0; j < x.size; ++j) {
          const double w = (*Qx)[j](i, l);
          if (w != 0.0) e.AddTerm(x[j], -w);
        }
      }
      f.Q[i][l] = std::move(e);
    }
    AffineExpr e = AffineExpr::Var(lambda, qhat.q(i));
    for (int j = 0; j < x.size; ++j) {
      if (C(i, j) != 0.0) e.AddTerm(x[j], -C(i, j));
    }
    f.q[i] = std::move(e);
  }
  AffineExpr r = AffineExpr::Var(lambda, qhat.r) + b;
  for (int j = 0; j < x.size; ++j) {
    if (d(j) != 0.0) r.AddTerm(x[j], -d(j));
  }
  f.r = std::move(r);
  return f;
}

}  // namespace

TwostepSdp BuildTwostepSdp(const Polyhedron& S, const EllipsoidalUncertainty& U0,
                           const TwoStepData& data, const VectorXd& c) {
  U0.Validate();
  const int n = U0.n;
  if (S.dimension() != n || c.size() != n) {
    throw std::invalid_argument("BuildTwostepSdp: dimension mismatch");
  }
  const SubspaceResult sub = ConsistentSubspace(data, n);
  if (!sub.consistent) {
    throw std::invalid_argument("trajectories admit no linear system");
  }
  if (sub.param.dimension() == 0) {
    throw std::invalid_argument("trajectories determine the system uniquely");
  }
  TwostepSdp sdp;
  sdp.param = sub.param;
  sdp.qhat = Restrict(U0.q, sdp.param);
  if (!CheckStrictInterior(sdp.qhat).strict) {
    throw StrictInteriorViolated("no strictly interior matrix in the prior");
  }
  const int r = S.num_halfspaces();
  sdp.x = sdp.program.AddVariables(n, "x");
  sdp.lambda1 = sdp.program.AddVariables(r, "lambda1");
  sdp.lambda2 = sdp.program.AddVariables(r, "lambda2");
  std::vector<AffineExpr> nonneg;
  for (int i = 0; i < r; ++i) {
    nonneg.push_back(S.b()(i) - AffineExpr::Dot(S.H().row(i).transpose(), sdp.x));
  }
  for (int i = 0; i < r; ++i) nonneg.push_back(AffineExpr::Var(sdp.lambda1[i]));
  for (int i = 0; i < r; ++i) nonneg.push_back(AffineExpr::Var(sdp.lambda2[i]));
  sdp.program.AddNonnegative(std::move(nonneg), "region");
  for (int i = 0; i < r; ++i) {
    FacetForms f = BuildFacetForms(sdp.param, S.H().row(i).transpose(), S.b()(i));
    conic::AddQuadraticNonneg(
        sdp.program,
        CertificateExpr(sdp.lambda1[i], sdp.qhat, nullptr, f.C1, f.d1, f.b, sdp.x),
        "one_step_" + std::to_string(i));
    conic::AddQuadraticNonneg(
        sdp.program,
        CertificateExpr(sdp.lambda2[i], sdp.qhat, &f.W, f.C2, f.d2, f.b, sdp.x),
        "two_step_" + std::to_string(i));
    sdp.facets.push_back(std::move(f));
  }
  sdp.program.SetObjective(AffineExpr::Dot(c, sdp.x), conic::Sense::kMinimize);
  return sdp;
}

geometry::LiftedProgram KnownTwostepRegion(const Polyhedron& S, const MatrixXd& A) {
  const int r = S.num_halfspaces(), n = S.dimension();
  if (A.rows() != n || A.cols() != n) {
    throw std::invalid_argument("KnownTwostepRegion: dimension mismatch");
  }
  MatrixXd H(3 * r, n);
  H << S.H(), S.H() * A, S.H() * A * A;
  VectorXd b(3 * r);
  b << S.b(), S.b(), S.b();
  return geometry::ToProgram(geometry::LiftedPolyhedron(H, MatrixXd(3 * r, 0), b));
}

namespace {

// Status of the prior restricted to the data: a single matrix, or an
// ellipsoid with a strictly interior point.
struct Restricted {
  SubspaceResult sub;
  QuadraticForm qhat;
  StrictPoint strict;
  bool singleton = false;
  MatrixXd A;
};

Restricted RestrictPrior(const EllipsoidalUncertainty& U0, const TwoStepData& data,
                         const TwostepSettings& settings) {
  Restricted out;
  out.sub = ConsistentSubspace(data, U0.n, settings.subspace_tol);
  if (!out.sub.consistent) {
    throw std::invalid_argument("trajectories admit no linear system");
  }
  out.qhat = Restrict(U0.q, out.sub.param);
  out.strict = CheckStrictInterior(out.qhat, settings.strict_tol);
  if (!out.strict.strict) {
    if (out.strict.value > settings.strict_tol) {
      throw std::invalid_argument("trajectories are inconsistent with the prior");
    }
    out.singleton = true;
    out.A = out.sub.param.Map(out.strict.a_bar);
  }
  return out;
}

// Largest entry range over the restricted ellipsoid.
double EntryWidth(const Restricted& r) {
  if (r.singleton) return 0.0;
  const MatrixXd B = r.sub.param.VecBasis();
  const MatrixXd S = B * r.qhat.Q.llt().solve(B.transpose());
  return 2.0 * std::sqrt(std::max(0.0, -r.strict.value) *
                         std::max(0.0, S.diagonal().maxCoeff()));
}

std::string VectorText(const VectorXd& v) {
  std::ostringstream out;
  out << v.transpose();
  return out.str();
}

}  // namespace

TwostepPoint MinCostTwostepPoint(const Polyhedron& S, const EllipsoidalUncertainty& U0,
                                 const TwoStepData& data, const VectorXd& c,
                                 const TwostepSettings& settings) {
  U0.Validate();
  const Restricted prior = RestrictPrior(U0, data, settings);
  TwostepPoint out;
  if (prior.singleton) {
    out.singleton = true;
    out.A = prior.A;
    geometry::LiftedProgram lp = KnownTwostepRegion(S, prior.A);
    lp.program.SetObjective(AffineExpr::Dot(c, lp.x), conic::Sense::kMinimize);
    const conic::Solution sol = conic::Solve(lp.program);
    out.status = sol.status;
    out.iterations = sol.stats.iterations;
    if (sol.optimal()) {
      out.x = sol.Value(lp.x);
      out.value = sol.objective_value;
    }
    return out;
  }
  const TwostepSdp sdp = BuildTwostepSdp(S, U0, data, c);
  const conic::Solution sol = conic::Solve(sdp.program, settings.solver);
  out.status = sol.status;
  out.iterations = sol.stats.iterations;
  if (sol.optimal()) {
    out.x = sol.Value(sdp.x);
    out.value = sol.objective_value;
    out.lambda1 = sol.Value(sdp.lambda1);
    out.lambda2 = sol.Value(sdp.lambda2);
  }
  return out;
}

LearnOutcome LearnTwoStep(const Polyhedron& S, const EllipsoidalUncertainty& U0,
                          const VectorXd& c, const TwoStepOracle& oracle,
                          const TwostepSettings& settings) {
  U0.Validate();
  const int n = U0.n;
  if (S.dimension() != n || c.size() != n) {
    throw std::invalid_argument("LearnTwoStep: dimension mismatch");
  }
  const int budget = settings.max_trajectories < 0 ? n : settings.max_trajectories;
  LearnOutcome outcome;
  TwoStepData data;
  int previous_dim = n * n + 1;
  auto learned = [&](const MatrixXd& A) {
    outcome.verdict = Verdict::kLearned;
    outcome.A = A;
    outcome.measurements_used = static_cast<int>(data.size());
    return outcome;
  };
  for (int k = 0;; ++k) {
    Restricted prior;
    try {
      prior = RestrictPrior(U0, data, settings);
    } catch (const std::invalid_argument& e) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = e.what();
      return outcome;
    }
    if (prior.sub.param.dimension() == 0) return learned(prior.sub.param.anchor);
    if (prior.singleton) return learned(prior.A);
    if (k == budget) {
      outcome.verdict = Verdict::kImpossible;
      outcome.message = "trajectory budget exhausted";
      return outcome;
    }
    if (prior.sub.param.dimension() >= previous_dim) {
      outcome.verdict = Verdict::kImpossible;
      outcome.message = "the last trajectory added no information";
      return outcome;
    }
    previous_dim = prior.sub.param.dimension();
    const TwostepPoint point = MinCostTwostepPoint(S, U0, data, c, settings);
    if (point.status == SolveStatus::kInfeasible) {
      outcome.verdict = Verdict::kImpossible;
      outcome.message = "no two-step safe query exists";
      return outcome;
    }
    if (point.status != SolveStatus::kOptimal) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "two-step SDP: " + conic::ToString(point.status);
      return outcome;
    }
    if (!geometry::Contains(S, point.x, settings.safety_tol)) {
      outcome.verdict = Verdict::kAborted;
      outcome.message = "query outside the safety region: " + VectorText(point.x);
      return outcome;
    }
    const auto [y, z] = oracle(point.x);
    if (y.size() != n || z.size() != n) {
      throw std::invalid_argument("oracle returned vectors of the wrong length");
    }
    for (const VectorXd* state : {&y, &z}) {
      if (!geometry::Contains(S, *state, settings.safety_tol)) {
        outcome.verdict = Verdict::kAborted;
        outcome.message = "safety violation: observation " + VectorText(*state) +
                          " leaves the safety region";
        return outcome;
      }
    }
    StepRecord& step = AppendStep(outcome, c, point.x, {y, z}, "optimal");
    step.uncertainty_width = EntryWidth(prior);
    step.solver_iterations = point.iterations;
    step.certificate.assign(point.lambda1.data(),
                            point.lambda1.data() + point.lambda1.size());
    step.certificate.insert(step.certificate.end(), point.lambda2.data(),
                            point.lambda2.data() + point.lambda2.size());
    data.push_back({point.x, y, z});
    outcome.measurements_used = static_cast<int>(data.size());
  }
}

TwostepBound TwostepOfflineBound(const Polyhedron& S, const EllipsoidalUncertainty& U0,
                                 const VectorXd& c, int m,
                                 const TwostepSettings& settings) {
  const TwostepPoint p = MinCostTwostepPoint(S, U0, {}, c, settings);
  TwostepBound out;
  out.status = p.status;
  if (p.status == SolveStatus::kOptimal) {
    out.x = p.x;
    out.value = m * p.value;
  }
  return out;
}

TwostepBound TwostepLowerBound(const Polyhedron& S, const MatrixXd& A_star,
                               const VectorXd& c, int m,
                               const conic::SolverSettings& settings) {
  geometry::LiftedProgram lp = KnownTwostepRegion(S, A_star);
  lp.program.SetObjective(AffineExpr::Dot(c, lp.x), conic::Sense::kMinimize);
  const conic::Solution sol = conic::Solve(lp.program, settings);
  TwostepBound out;
  out.status = sol.status;
  if (sol.optimal()) {
    out.x = sol.Value(lp.x);
    out.value = m * sol.objective_value;
  }
  return out;
}

}  // namespace safelearn::linear
