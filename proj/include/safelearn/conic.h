#pragma once

// Solver-agnostic description of linear, second-order cone and semidefinite
// programs, and the interior-point backend that solves them.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace safelearn::conic {

// A contiguous group of scalar decision variables.
struct VarRange {
  int start = 0;
  int size = 0;

  int operator[](int i) const { return start + i; }
};

// Sparse affine expression sum_k coeff_k * x_{var_k} + constant.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(double constant) : constant_(constant) {}  // NOLINT

  static AffineExpr Var(int index, double coeff = 1.0);
  // sum_i coeffs[i] * x_{range[i]}
  static AffineExpr Dot(const Eigen::VectorXd& coeffs, const VarRange& range);

  AffineExpr& AddTerm(int index, double coeff);
  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double scale);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) {
    return a += b;
  }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
    return a -= b;
  }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  AffineExpr operator-() const { return -1.0 * *this; }

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }
  double Evaluate(const Eigen::VectorXd& x) const;

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

enum class ConeKind {
  kZero,          // every row == 0
  kNonnegative,   // every row >= 0
  kSecondOrder,   // rows[0] >= ||rows[1:]||_2
  kPsd,           // symmetric matrix of rows is positive semidefinite
};

struct ConstraintBlock {
  ConeKind kind = ConeKind::kNonnegative;
  // For kPsd the rows hold the lower triangle in column-major order, i.e.
  // (0,0),(1,0),...,(m-1,0),(1,1),(2,1),...
  std::vector<AffineExpr> rows;
  int order = 0;  // matrix order for kPsd
  std::string name;
};

enum class Sense { kMinimize, kMaximize };

// Index of a constraint block within its program.
using BlockId = int;

class ConicProgram {
 public:
  VarRange AddVariables(int count, const std::string& name = "");
  int num_variables() const { return num_variables_; }

  BlockId AddEquality(std::vector<AffineExpr> rows, std::string name = "");
  BlockId AddEquality(const AffineExpr& lhs, const AffineExpr& rhs,
                      std::string name = "");
  BlockId AddNonnegative(std::vector<AffineExpr> rows, std::string name = "");
  // lhs <= rhs
  BlockId AddLessEqual(const AffineExpr& lhs, const AffineExpr& rhs,
                       std::string name = "");
  // rows[0] >= ||rows[1:]||_2
  BlockId AddSecondOrderCone(std::vector<AffineExpr> rows,
                             std::string name = "");
  // (u, v, w) with 2 u v >= ||w||^2, u, v >= 0, written as a standard cone.
  BlockId AddRotatedSecondOrderCone(const AffineExpr& u, const AffineExpr& v,
                                    std::vector<AffineExpr> w,
                                    std::string name = "");
  // matrix[i][j] for i >= j is read; the upper triangle is ignored.
  BlockId AddPsd(const std::vector<std::vector<AffineExpr>>& matrix,
                 std::string name = "");
  // Declares a fresh m x m symmetric matrix variable constrained PSD. The
  // variable entries are returned in the same lower-triangle order as
  // ConstraintBlock::rows.
  std::pair<VarRange, BlockId> AddPsdVariable(int order,
                                              const std::string& name = "");

  void SetObjective(AffineExpr objective, Sense sense);

  const std::vector<ConstraintBlock>& blocks() const { return blocks_; }
  const AffineExpr& objective() const { return objective_; }
  Sense sense() const { return sense_; }
  const std::vector<std::pair<std::string, VarRange>>& variable_groups() const {
    return groups_;
  }
  bool HasPsd() const;
  bool HasSecondOrder() const;

 private:
  BlockId AddBlock(ConstraintBlock block);

  int num_variables_ = 0;
  std::vector<std::pair<std::string, VarRange>> groups_;
  std::vector<ConstraintBlock> blocks_;
  AffineExpr objective_;
  Sense sense_ = Sense::kMinimize;
};

// Index into the lower-triangle column-major ordering of an m x m matrix.
int LowerIndex(int order, int row, int col);
Eigen::MatrixXd LowerToMatrix(const Eigen::VectorXd& lower, int order);

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

std::string ToString(SolveStatus status);

struct SolverSettings {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iterations = 150;
  double static_regularization = 1e-10;
  int refinement_steps = 8;
  bool verbose = false;

  // Default tolerances for programs containing second-order or PSD cones.
  static SolverSettings Conic() {
    SolverSettings s;
    s.feas_tol = 1e-7;
    s.gap_tol = 1e-7;
    return s;
  }
};

struct SolveStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  // Status certified only within a relaxed tolerance after the iteration
  // stalled.
  bool reduced_accuracy = false;
};

// Primal and dual results. Duals are the multipliers of the minimization form
// (objective negated for kMaximize): for a block with rows e(x) in cone K the
// dual z lies in the dual cone and the Lagrangian reads f(x) - <z, e(x)>.
struct Solution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd primal;
  std::vector<Eigen::VectorXd> dual;   // per block, same layout as rows
  std::vector<Eigen::VectorXd> slack;  // per block, cone-side row values
  double objective_value = 0.0;        // in the caller's sense
  double dual_objective_value = 0.0;   // in the caller's sense
  SolveStats stats;

  bool optimal() const { return status == SolveStatus::kOptimal; }
  Eigen::VectorXd Value(const VarRange& range) const {
    return primal.segment(range.start, range.size);
  }
  double Value(int index) const { return primal(index); }
  // PSD blocks as full symmetric matrices.
  Eigen::MatrixXd DualMatrix(const ConicProgram& program, BlockId id) const;
  Eigen::MatrixXd SlackMatrix(const ConicProgram& program, BlockId id) const;
};

Solution Solve(const ConicProgram& program,
               const SolverSettings& settings = SolverSettings());

// Picks LP or conic default tolerances from the cone types present.
SolverSettings DefaultSettingsFor(const ConicProgram& program);

// Writes the program in a sparse text layout: objective, variable dimensions,
// then one section per constraint block with (row, column, value) triplets.
void WriteSparseText(const ConicProgram& program, std::ostream& out);

}  // namespace safelearn::conic
