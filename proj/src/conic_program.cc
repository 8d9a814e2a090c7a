#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "safelearn/conic.h"

namespace safelearn::conic {

AffineExpr AffineExpr::Var(int index, double coeff) {
  AffineExpr e;
  e.terms_.emplace_back(index, coeff);
  return e;
}

AffineExpr AffineExpr::Dot(const Eigen::VectorXd& coeffs,
                           const VarRange& range) {
  if (coeffs.size() != range.size) {
    throw std::invalid_argument("AffineExpr::Dot: size mismatch");
  }
  AffineExpr e;
  for (int i = 0; i < range.size; ++i) {
    if (coeffs(i) != 0.0) e.terms_.emplace_back(range[i], coeffs(i));
  }
  return e;
}

AffineExpr& AffineExpr::AddTerm(int index, double coeff) {
  if (coeff != 0.0) terms_.emplace_back(index, coeff);
  return *this;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  constant_ += other.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  terms_.reserve(terms_.size() + other.terms_.size());
  for (const auto& [index, coeff] : other.terms_) {
    terms_.emplace_back(index, -coeff);
  }
  constant_ -= other.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator*=(double scale) {
  for (auto& term : terms_) term.second *= scale;
  constant_ *= scale;
  return *this;
}

double AffineExpr::Evaluate(const Eigen::VectorXd& x) const {
  double value = constant_;
  for (const auto& [index, coeff] : terms_) value += coeff * x(index);
  return value;
}

VarRange ConicProgram::AddVariables(int count, const std::string& name) {
  if (count < 0) throw std::invalid_argument("negative variable count");
  VarRange range{num_variables_, count};
  num_variables_ += count;
  groups_.emplace_back(name, range);
  return range;
}

BlockId ConicProgram::AddBlock(ConstraintBlock block) {
  for (const auto& row : block.rows) {
    for (const auto& [index, coeff] : row.terms()) {
      if (index < 0 || index >= num_variables_) {
        throw std::out_of_range("constraint '" + block.name +
                                "' references an undeclared variable");
      }
      if (!std::isfinite(coeff)) {
        throw std::invalid_argument("constraint '" + block.name +
                                    "' has a non-finite coefficient");
      }
    }
    if (!std::isfinite(row.constant())) {
      throw std::invalid_argument("constraint '" + block.name +
                                  "' has a non-finite constant");
    }
  }
  blocks_.push_back(std::move(block));
  return static_cast<BlockId>(blocks_.size() - 1);
}

BlockId ConicProgram::AddEquality(std::vector<AffineExpr> rows,
                                  std::string name) {
  return AddBlock({ConeKind::kZero, std::move(rows), 0, std::move(name)});
}

BlockId ConicProgram::AddEquality(const AffineExpr& lhs, const AffineExpr& rhs,
                                  std::string name) {
  return AddEquality(std::vector<AffineExpr>{lhs - rhs}, std::move(name));
}

BlockId ConicProgram::AddNonnegative(std::vector<AffineExpr> rows,
                                     std::string name) {
  return AddBlock(
      {ConeKind::kNonnegative, std::move(rows), 0, std::move(name)});
}

BlockId ConicProgram::AddLessEqual(const AffineExpr& lhs,
                                   const AffineExpr& rhs, std::string name) {
  return AddNonnegative(std::vector<AffineExpr>{rhs - lhs}, std::move(name));
}

BlockId ConicProgram::AddSecondOrderCone(std::vector<AffineExpr> rows,
                                         std::string name) {
  if (rows.empty()) throw std::invalid_argument("empty second-order cone");
  return AddBlock(
      {ConeKind::kSecondOrder, std::move(rows), 0, std::move(name)});
}

BlockId ConicProgram::AddRotatedSecondOrderCone(const AffineExpr& u,
                                                const AffineExpr& v,
                                                std::vector<AffineExpr> w,
                                                std::string name) {
  // 2uv >= |w|^2  <=>  u + v >= ||(u - v, sqrt(2) w)||.
  std::vector<AffineExpr> rows;
  rows.reserve(w.size() + 2);
  rows.push_back(u + v);
  rows.push_back(u - v);
  for (auto& wi : w) rows.push_back(std::sqrt(2.0) * wi);
  return AddSecondOrderCone(std::move(rows), std::move(name));
}

BlockId ConicProgram::AddPsd(const std::vector<std::vector<AffineExpr>>& matrix,
                             std::string name) {
  const int m = static_cast<int>(matrix.size());
  ConstraintBlock block{ConeKind::kPsd, {}, m, std::move(name)};
  block.rows.reserve(m * (m + 1) / 2);
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      if (static_cast<int>(matrix[i].size()) != m) {
        throw std::invalid_argument("PSD block is not square");
      }
      block.rows.push_back(matrix[i][j]);
    }
  }
  return AddBlock(std::move(block));
}

std::pair<VarRange, BlockId> ConicProgram::AddPsdVariable(
    int order, const std::string& name) {
  VarRange range = AddVariables(order * (order + 1) / 2, name);
  ConstraintBlock block{ConeKind::kPsd, {}, order, name};
  for (int k = 0; k < range.size; ++k) {
    block.rows.push_back(AffineExpr::Var(range[k]));
  }
  return {range, AddBlock(std::move(block))};
}

void ConicProgram::SetObjective(AffineExpr objective, Sense sense) {
  for (const auto& [index, coeff] : objective.terms()) {
    if (index < 0 || index >= num_variables_) {
      throw std::out_of_range("objective references an undeclared variable");
    }
  }
  objective_ = std::move(objective);
  sense_ = sense;
}

bool ConicProgram::HasPsd() const {
  return std::any_of(blocks_.begin(), blocks_.end(), [](const auto& b) {
    return b.kind == ConeKind::kPsd;
  });
}

bool ConicProgram::HasSecondOrder() const {
  return std::any_of(blocks_.begin(), blocks_.end(), [](const auto& b) {
    return b.kind == ConeKind::kSecondOrder;
  });
}

int LowerIndex(int order, int row, int col) {
  if (row < col) std::swap(row, col);
  // Columns before `col` contribute order, order-1, ... entries.
  return col * order - col * (col - 1) / 2 + (row - col);
}

Eigen::MatrixXd LowerToMatrix(const Eigen::VectorXd& lower, int order) {
  Eigen::MatrixXd m(order, order);
  int k = 0;
  for (int j = 0; j < order; ++j) {
    for (int i = j; i < order; ++i) {
      m(i, j) = lower(k);
      m(j, i) = lower(k);
      ++k;
    }
  }
  return m;
}

std::string ToString(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kUnbounded:
      return "unbounded";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

Eigen::MatrixXd Solution::DualMatrix(const ConicProgram& program,
                                     BlockId id) const {
  const auto& block = program.blocks().at(id);
  if (block.kind != ConeKind::kPsd) {
    throw std::invalid_argument("DualMatrix: block is not PSD");
  }
  return LowerToMatrix(dual.at(id), block.order);
}

Eigen::MatrixXd Solution::SlackMatrix(const ConicProgram& program,
                                      BlockId id) const {
  const auto& block = program.blocks().at(id);
  if (block.kind != ConeKind::kPsd) {
    throw std::invalid_argument("SlackMatrix: block is not PSD");
  }
  return LowerToMatrix(slack.at(id), block.order);
}

SolverSettings DefaultSettingsFor(const ConicProgram& program) {
  if (program.HasPsd() || program.HasSecondOrder()) {
    return SolverSettings::Conic();
  }
  return SolverSettings();
}

namespace {

const char* KindName(ConeKind kind) {
  switch (kind) {
    case ConeKind::kZero:
      return "zero";
    case ConeKind::kNonnegative:
      return "nonneg";
    case ConeKind::kSecondOrder:
      return "soc";
    case ConeKind::kPsd:
      return "psd";
  }
  return "?";
}

}  // namespace

void WriteSparseText(const ConicProgram& program, std::ostream& out) {
  const auto precision = out.precision(17);
  out << "objective "
      << (program.sense() == Sense::kMinimize ? "min" : "max") << ' '
      << program.objective().terms().size() << ' '
      << program.objective().constant() << '\n';
  for (const auto& [index, coeff] : program.objective().terms()) {
    out << index << ' ' << coeff << '\n';
  }
  out << "variables " << program.num_variables() << '\n';
  for (const auto& [name, range] : program.variable_groups()) {
    out << (name.empty() ? "_" : name) << ' ' << range.start << ' '
        << range.size << '\n';
  }
  out << "blocks " << program.blocks().size() << '\n';
  for (const auto& block : program.blocks()) {
    std::size_t nnz = 0;
    for (const auto& row : block.rows) nnz += row.terms().size();
    out << "block " << KindName(block.kind) << ' ' << block.rows.size() << ' '
        << block.order << ' ' << nnz << ' '
        << (block.name.empty() ? "_" : block.name) << '\n';
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      for (const auto& [index, coeff] : block.rows[r].terms()) {
        out << r << ' ' << index << ' ' << coeff << '\n';
      }
    }
    out << "constants";
    for (const auto& row : block.rows) out << ' ' << row.constant();
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace safelearn::conic
