#pragma once

// Scalar expressions over x1..xn: numbers, named constants, + - * / ^,
// parentheses and the functions sin, cos, exp, sqrt, abs.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace safelearn {

class ExpressionError : public std::runtime_error {
 public:
  ExpressionError(const std::string& message, int column)
      : std::runtime_error(message + " at column " + std::to_string(column)),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

class Expression {
 public:
  struct Node;

  // Throws ExpressionError on a syntax error, an unknown name or a variable
  // index outside 1..n.
  static Expression Parse(const std::string& text, int n,
                          const std::map<std::string, double>& constants = {});

  double Evaluate(const Eigen::VectorXd& x) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

// One expression per output coordinate.
class VectorExpression {
 public:
  VectorExpression() = default;
  static VectorExpression Parse(const std::vector<std::string>& components, int n,
                                const std::map<std::string, double>& constants = {});

  int size() const { return static_cast<int>(components_.size()); }
  bool empty() const { return components_.empty(); }
  Eigen::VectorXd Evaluate(const Eigen::VectorXd& x) const;
  std::vector<std::string> Texts() const;

 private:
  std::vector<Expression> components_;
};

}  // namespace safelearn
