#include "safelearn/geometry.h"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace safelearn::geometry {

using conic::AffineExpr;
using conic::ConicProgram;
using conic::Sense;
using conic::Solution;
using conic::SolveStatus;
using conic::VarRange;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AffineExpr RowExpr(const MatrixXd& M, int row, const VarRange& vars) {
  AffineExpr e;
  for (int j = 0; j < M.cols(); ++j) {
    if (M(row, j) != 0.0) e.AddTerm(vars[j], M(row, j));
  }
  return e;
}

}  // namespace

Polyhedron::Polyhedron(MatrixXd H, VectorXd b) : H_(std::move(H)), b_(std::move(b)) {
  if (H_.rows() != b_.size()) {
    throw std::invalid_argument("Polyhedron: H and b row counts differ");
  }
  if (H_.cols() < 1) throw std::invalid_argument("Polyhedron: dimension < 1");
  for (int i = 0; i < H_.rows(); ++i) {
    if (H_.row(i).isZero(0.0)) {
      throw std::invalid_argument("Polyhedron: zero normal in row " +
                                  std::to_string(i));
    }
  }
}

Polyhedron::Polyhedron(const std::vector<Halfspace>& halfspaces) {
  if (halfspaces.empty()) throw std::invalid_argument("Polyhedron: no halfspaces");
  const int n = static_cast<int>(halfspaces.front().normal.size());
  MatrixXd H(halfspaces.size(), n);
  VectorXd b(halfspaces.size());
  for (std::size_t i = 0; i < halfspaces.size(); ++i) {
    if (halfspaces[i].normal.size() != n) {
      throw std::invalid_argument("Polyhedron: normals differ in length");
    }
    H.row(i) = halfspaces[i].normal.transpose();
    b(i) = halfspaces[i].offset;
  }
  *this = Polyhedron(std::move(H), std::move(b));
}

Polyhedron Polyhedron::Box(int n, double lower, double upper) {
  MatrixXd H(2 * n, n);
  H << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  VectorXd b(2 * n);
  b << VectorXd::Constant(n, upper), VectorXd::Constant(n, -lower);
  return Polyhedron(std::move(H), std::move(b));
}

double Polyhedron::MaxViolation(const VectorXd& x) const {
  if (x.size() != dimension()) {
    throw std::invalid_argument("Polyhedron: dimension mismatch");
  }
  if (H_.rows() == 0) return -kInf;
  return (H_ * x - b_).maxCoeff();
}

bool Contains(const Polyhedron& P, const VectorXd& x, double tol) {
  return P.MaxViolation(x) <= tol;
}

LiftedPolyhedron::LiftedPolyhedron(MatrixXd A_in, MatrixXd B_in, VectorXd c_in)
    : A(std::move(A_in)), B(std::move(B_in)), c(std::move(c_in)) {
  Aeq.resize(0, A.cols());
  Beq.resize(0, B.cols());
  ceq.resize(0);
  Validate();
}

LiftedPolyhedron LiftedPolyhedron::FromPolyhedron(const Polyhedron& P) {
  return LiftedPolyhedron(P.H(), MatrixXd(P.num_halfspaces(), 0), P.b());
}

void LiftedPolyhedron::AddEqualities(const MatrixXd& Ax, const MatrixXd& By,
                                     const VectorXd& rhs) {
  if (Ax.cols() != A.cols() || By.cols() != B.cols() ||
      Ax.rows() != By.rows() || Ax.rows() != rhs.size()) {
    throw std::invalid_argument("LiftedPolyhedron: equality shape mismatch");
  }
  MatrixXd new_aeq(Aeq.rows() + Ax.rows(), A.cols());
  new_aeq << Aeq, Ax;
  MatrixXd new_beq(Beq.rows() + By.rows(), B.cols());
  new_beq << Beq, By;
  VectorXd new_ceq(ceq.size() + rhs.size());
  new_ceq << ceq, rhs;
  Aeq = std::move(new_aeq);
  Beq = std::move(new_beq);
  ceq = std::move(new_ceq);
}

void LiftedPolyhedron::Validate() const {
  if (A.rows() != B.rows() || A.rows() != c.size()) {
    throw std::invalid_argument("LiftedPolyhedron: A, B, c row counts differ");
  }
  if (Aeq.rows() != Beq.rows() || Aeq.rows() != ceq.size() ||
      Aeq.cols() != A.cols() || Beq.cols() != B.cols()) {
    throw std::invalid_argument("LiftedPolyhedron: equality rows malformed");
  }
}

LiftedProgram ToProgram(const LiftedPolyhedron& P) {
  P.Validate();
  LiftedProgram lp;
  lp.x = lp.program.AddVariables(P.dimension(), "x");
  const VarRange y = lp.program.AddVariables(P.lifted_dimension(), "y");
  std::vector<AffineExpr> rows;
  rows.reserve(P.A.rows());
  for (int i = 0; i < P.A.rows(); ++i) {
    AffineExpr e(P.c(i));
    e -= RowExpr(P.A, i, lp.x);
    e -= RowExpr(P.B, i, y);
    rows.push_back(std::move(e));
  }
  if (!rows.empty()) lp.program.AddNonnegative(std::move(rows), "inequalities");
  std::vector<AffineExpr> eqs;
  for (int i = 0; i < P.Aeq.rows(); ++i) {
    AffineExpr e = RowExpr(P.Aeq, i, lp.x);
    e += RowExpr(P.Beq, i, y);
    e -= AffineExpr(P.ceq(i));
    eqs.push_back(std::move(e));
  }
  if (!eqs.empty()) lp.program.AddEquality(std::move(eqs), "equalities");
  return lp;
}

SupportResult Support(const LiftedProgram& P, const VectorXd& d,
                      const conic::SolverSettings& settings) {
  if (d.size() != P.x.size) {
    throw std::invalid_argument("Support: direction has the wrong length");
  }
  ConicProgram program = P.program;
  program.SetObjective(AffineExpr::Dot(d, P.x), Sense::kMaximize);
  const Solution sol = conic::Solve(program, settings);
  SupportResult result;
  switch (sol.status) {
    case SolveStatus::kOptimal:
      result.status = SupportStatus::kBounded;
      result.value = sol.objective_value;
      result.point = sol.Value(P.x);
      break;
    case SolveStatus::kUnbounded:
      result.status = SupportStatus::kUnbounded;
      result.value = kInf;
      break;
    case SolveStatus::kInfeasible:
      result.status = SupportStatus::kEmpty;
      result.value = -kInf;
      break;
    case SolveStatus::kNumericalFailure:
      result.status = SupportStatus::kFailed;
      result.value = std::numeric_limits<double>::quiet_NaN();
      break;
  }
  return result;
}

SupportResult Support(const LiftedPolyhedron& P, const VectorXd& d,
                      const conic::SolverSettings& settings) {
  return Support(ToProgram(P), d, settings);
}

double SingletonResult::max_width() const {
  return widths.size() == 0 ? 0.0 : widths.maxCoeff();
}

SingletonResult IsSingleton(const LiftedProgram& P, double tol,
                            const conic::SolverSettings& settings) {
  const int n = P.x.size;
  SingletonResult result;
  result.widths = VectorXd::Zero(n);
  result.point = VectorXd::Zero(n);
  bool bounded = true;
  for (int i = 0; i < n; ++i) {
    const VectorXd e = VectorXd::Unit(n, i);
    const SupportResult hi = Support(P, e, settings);
    if (hi.status == SupportStatus::kEmpty) {
      result.status = SingletonStatus::kEmpty;
      return result;
    }
    const SupportResult lo = Support(P, -e, settings);
    if (lo.status == SupportStatus::kEmpty) {
      result.status = SingletonStatus::kEmpty;
      return result;
    }
    if (hi.status == SupportStatus::kFailed ||
        lo.status == SupportStatus::kFailed) {
      result.status = SingletonStatus::kFailed;
      return result;
    }
    if (hi.status == SupportStatus::kUnbounded ||
        lo.status == SupportStatus::kUnbounded) {
      result.widths(i) = kInf;
      bounded = false;
      continue;
    }
    result.widths(i) = std::max(0.0, hi.value + lo.value);
    result.point(i) = 0.5 * (hi.value - lo.value);
  }
  result.status = bounded && result.widths.maxCoeff() <= tol
                      ? SingletonStatus::kSingleton
                      : SingletonStatus::kNotSingleton;
  return result;
}

SingletonResult IsSingleton(const LiftedPolyhedron& P, double tol,
                            const conic::SolverSettings& settings) {
  return IsSingleton(ToProgram(P), tol, settings);
}

double RelativeMinSingularValue(const std::vector<VectorXd>& vectors) {
  if (vectors.empty()) return 1.0;
  const int n = static_cast<int>(vectors.front().size());
  MatrixXd M(vectors.size(), n);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double norm = vectors[k].norm();
    if (!(norm > 0.0)) return 0.0;
    M.row(k) = vectors[k].transpose() / norm;
  }
  if (static_cast<int>(vectors.size()) > n) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const VectorXd sv = svd.singularValues();
  return sv(sv.size() - 1) / sv(0);
}

bool IndependentOf(const VectorXd& x, const BasisSet& basis) {
  if (x.size() != basis.dimension()) {
    throw std::invalid_argument("IndependentOf: dimension mismatch");
  }
  std::vector<VectorXd> stack = basis.vectors();
  stack.push_back(x);
  return RelativeMinSingularValue(stack) >= basis.rank_tolerance();
}

bool BasisSet::TryAdd(const VectorXd& x) {
  if (!IndependentOf(x, *this)) return false;
  vectors_.push_back(x);
  return true;
}

MatrixXd BasisSet::Matrix() const {
  MatrixXd M(vectors_.size(), dimension_);
  for (std::size_t k = 0; k < vectors_.size(); ++k) M.row(k) = vectors_[k].transpose();
  return M;
}

namespace {

// A point of P with its lifted witness, or nullopt-like flag when empty.
bool FeasiblePoint(const LiftedPolyhedron& P, const conic::SolverSettings& settings,
                   VectorXd& x, VectorXd& y) {
  LiftedProgram lp = ToProgram(P);
  const Solution sol = conic::Solve(lp.program, settings);
  if (sol.status == SolveStatus::kInfeasible) return false;
  if (sol.status != SolveStatus::kOptimal) {
    throw std::runtime_error("SpanBasis: feasibility LP failed (" +
                             conic::ToString(sol.status) + ")");
  }
  x = sol.Value(lp.x);
  y = sol.primal.segment(P.dimension(), P.lifted_dimension());
  return true;
}

struct ConeSolution {
  VectorXd xp, xm, yp, ym;
  double lp = 0.0, lm = 0.0;
};

// Searches the homogenized system for a point with x_i = sign, x orthogonal
// to `basis`. The objective keeps the optimal face bounded.
bool SolveConeSystem(const LiftedPolyhedron& P, const BasisSet& basis, int i,
                     double sign, const conic::SolverSettings& settings,
                     ConeSolution& out) {
  const int n = P.dimension(), p = P.lifted_dimension();
  ConicProgram prog;
  const VarRange xp = prog.AddVariables(n, "x_plus");
  const VarRange xm = prog.AddVariables(n, "x_minus");
  const VarRange yp = prog.AddVariables(p, "y_plus");
  const VarRange ym = prog.AddVariables(p, "y_minus");
  const VarRange lam = prog.AddVariables(2, "lambda");
  const VarRange ax = prog.AddVariables(2 * n, "abs_x");
  const VarRange ay = prog.AddVariables(2 * p, "abs_y");

  std::vector<AffineExpr> nonneg;
  std::vector<AffineExpr> eqs;
  auto add_side = [&](const VarRange& xv, const VarRange& yv, int lam_index) {
    const AffineExpr lv = AffineExpr::Var(lam[lam_index]);
    for (int r = 0; r < P.A.rows(); ++r) {
      AffineExpr e = P.c(r) * lv;
      e -= RowExpr(P.A, r, xv);
      e -= RowExpr(P.B, r, yv);
      nonneg.push_back(std::move(e));
    }
    for (int r = 0; r < P.Aeq.rows(); ++r) {
      AffineExpr e = RowExpr(P.Aeq, r, xv);
      e += RowExpr(P.Beq, r, yv);
      e -= P.ceq(r) * lv;
      eqs.push_back(std::move(e));
    }
    nonneg.push_back(lv);
  };
  add_side(xp, yp, 0);
  add_side(xm, ym, 1);
  AffineExpr objective = AffineExpr::Var(lam[0]) + AffineExpr::Var(lam[1]);
  auto add_abs = [&](const VarRange& v, const VarRange& a, int offset) {
    for (int k = 0; k < v.size; ++k) {
      const AffineExpr t = AffineExpr::Var(a[offset + k]);
      nonneg.push_back(t - AffineExpr::Var(v[k]));
      nonneg.push_back(t + AffineExpr::Var(v[k]));
      objective += t;
    }
  };
  add_abs(xp, ax, 0);
  add_abs(xm, ax, n);
  add_abs(yp, ay, 0);
  add_abs(ym, ay, p);
  for (const VectorXd& e : basis.vectors()) {
    eqs.push_back(AffineExpr::Dot(e, xp) - AffineExpr::Dot(e, xm));
  }
  eqs.push_back(AffineExpr::Var(xp[i]) - AffineExpr::Var(xm[i]) - sign);
  prog.AddNonnegative(std::move(nonneg), "cone");
  prog.AddEquality(std::move(eqs), "normalization");
  prog.SetObjective(objective, Sense::kMinimize);

  const Solution sol = conic::Solve(prog, settings);
  if (sol.status == SolveStatus::kInfeasible) return false;
  if (sol.status != SolveStatus::kOptimal) {
    throw std::runtime_error("SpanBasis: could not certify the cone system (" +
                             conic::ToString(sol.status) + ")");
  }
  out.xp = sol.Value(xp);
  out.xm = sol.Value(xm);
  out.yp = sol.Value(yp);
  out.ym = sol.Value(ym);
  out.lp = std::max(0.0, sol.Value(lam[0]));
  out.lm = std::max(0.0, sol.Value(lam[1]));
  return true;
}

double OrthogonalFraction(const VectorXd& v, const BasisSet& basis) {
  const double norm = v.norm();
  if (!(norm > 0.0)) return 0.0;
  if (basis.size() == 0) return 1.0;
  const MatrixXd Q = basis.Matrix().transpose().householderQr().householderQ() *
                     MatrixXd::Identity(basis.dimension(), basis.size());
  return (v - Q * (Q.transpose() * v)).norm() / norm;
}

}  // namespace

SpanBasisResult SpanBasis(const LiftedPolyhedron& P,
                          const GeometrySettings& settings) {
  P.Validate();
  const int n = P.dimension();
  SpanBasisResult result{BasisSet(n, settings.rank_tol), false, {}, 0};
  VectorXd x_hat, y_hat;
  ++result.lp_solves;
  if (!FeasiblePoint(P, settings.solver, x_hat, y_hat)) {
    result.empty = true;
    return result;
  }
  while (result.basis.size() < n) {
    bool grew = false;
    for (int i = 0; i < n && !grew; ++i) {
      for (double sign : {1.0, -1.0}) {
        ConeSolution cs;
        ++result.lp_solves;
        if (!SolveConeSystem(P, result.basis, i, sign, settings.solver, cs)) {
          continue;
        }
        if (result.basis.size() > 0) {
          x_hat = result.basis[0];
          y_hat = result.witnesses[0];
        }
        if (cs.lp < 1.0 || cs.lm < 1.0) {
          cs.xp += x_hat;
          cs.xm += x_hat;
          cs.yp += y_hat;
          cs.ym += y_hat;
          cs.lp += 1.0;
          cs.lm += 1.0;
        }
        const VectorXd up = cs.xp / cs.lp, um = cs.xm / cs.lm;
        const bool plus_first =
            OrthogonalFraction(up, result.basis) >= OrthogonalFraction(um, result.basis);
        const VectorXd& first = plus_first ? up : um;
        const VectorXd& second = plus_first ? um : up;
        if (result.basis.TryAdd(first)) {
          result.witnesses.push_back(plus_first ? VectorXd(cs.yp / cs.lp)
                                                : VectorXd(cs.ym / cs.lm));
        } else if (result.basis.TryAdd(second)) {
          result.witnesses.push_back(plus_first ? VectorXd(cs.ym / cs.lm)
                                                : VectorXd(cs.yp / cs.lp));
        } else {
          continue;
        }
        grew = true;
        break;
      }
    }
    if (!grew) break;
  }
  return result;
}

std::vector<Eigen::Vector2d> EvenDirections(int K) {
  if (K < 3) throw std::invalid_argument("direction count must be >= 3");
  std::vector<Eigen::Vector2d> dirs(K);
  for (int k = 0; k < K; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / K;
    dirs[k] = Eigen::Vector2d(std::cos(theta), std::sin(theta));
  }
  return dirs;
}

Polygon PolygonFromSupport(const SupportFunction& support, int K) {
  Polygon poly;
  poly.directions = EvenDirections(K);
  poly.support.resize(K);
  for (int k = 0; k < K; ++k) {
    const SupportResult r = support(poly.directions[k]);
    switch (r.status) {
      case SupportStatus::kEmpty:
        poly.empty = true;
        poly.support.clear();
        poly.directions.clear();
        return poly;
      case SupportStatus::kUnbounded:
        poly.unbounded = true;
        poly.support[k] = kInf;
        break;
      case SupportStatus::kBounded:
        poly.support[k] = r.value;
        break;
      case SupportStatus::kFailed:
        throw std::runtime_error("support LP failed in direction " +
                                 std::to_string(k));
    }
  }
  poly.vertices.resize(K);
  for (int k = 0; k < K; ++k) {
    const int j = (k + 1) % K;
    if (!std::isfinite(poly.support[k]) || !std::isfinite(poly.support[j])) {
      poly.vertices[k] = Eigen::Vector2d::Constant(std::nan(""));
      continue;
    }
    Eigen::Matrix2d M;
    M.row(0) = poly.directions[k].transpose();
    M.row(1) = poly.directions[j].transpose();
    poly.vertices[k] =
        M.inverse() * Eigen::Vector2d(poly.support[k], poly.support[j]);
  }
  return poly;
}

bool Polygon::Contains(const Eigen::Vector2d& p, double tol) const {
  if (empty) return false;
  for (std::size_t k = 0; k < directions.size(); ++k) {
    if (directions[k].dot(p) > support[k] + tol) return false;
  }
  return true;
}

bool Polygon::ContainsPolygon(const Polygon& inner, double tol) const {
  if (inner.empty) return true;
  if (empty) return false;
  for (const auto& v : inner.vertices) {
    if (!v.allFinite()) {
      if (!unbounded) return false;
      continue;
    }
    if (!Contains(v, tol)) return false;
  }
  return true;
}

Polygon ProjectLinear(const LiftedProgram& P, const MatrixXd& F, int K,
                      const conic::SolverSettings& settings) {
  if (F.rows() != 2 || F.cols() != P.x.size) {
    throw std::invalid_argument("ProjectLinear: feature map must be 2 x n");
  }
  return PolygonFromSupport(
      [&](const Eigen::Vector2d& d) {
        return Support(P, F.transpose() * d, settings);
      },
      K);
}

Polygon Project2d(const LiftedProgram& P, std::pair<int, int> dims, int K,
                  const conic::SolverSettings& settings) {
  const int n = P.x.size;
  if (dims.first < 0 || dims.first >= n || dims.second < 0 ||
      dims.second >= n || dims.first == dims.second) {
    throw std::invalid_argument("Project2d: invalid coordinate pair");
  }
  MatrixXd F = MatrixXd::Zero(2, n);
  F(0, dims.first) = 1.0;
  F(1, dims.second) = 1.0;
  return ProjectLinear(P, F, K, settings);
}

Polygon Project2d(const LiftedPolyhedron& P, std::pair<int, int> dims, int K,
                  const conic::SolverSettings& settings) {
  return Project2d(ToProgram(P), dims, K, settings);
}

void WritePolygonCsv(const Polygon& polygon, std::ostream& out) {
  const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "direction_x,direction_y,support_value,vertex_x,vertex_y\n";
  for (std::size_t k = 0; k < polygon.directions.size(); ++k) {
    out << polygon.directions[k].x() << ',' << polygon.directions[k].y() << ','
        << polygon.support[k] << ',' << polygon.vertices[k].x() << ','
        << polygon.vertices[k].y() << '\n';
  }
  out.precision(precision);
}

}  // namespace safelearn::geometry
