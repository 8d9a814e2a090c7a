#include "safelearn/expression.h"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

namespace safelearn {

struct Expression::Node {
  enum class Kind { kConstant, kVariable, kNegate, kBinary, kCall };
  Kind kind = Kind::kConstant;
  double value = 0.0;
  int index = 0;
  char op = 0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> left, right;

  double Evaluate(const Eigen::VectorXd& x) const {
    switch (kind) {
      case Kind::kConstant:
        return value;
      case Kind::kVariable:
        return x(index);
      case Kind::kNegate:
        return -left->Evaluate(x);
      case Kind::kCall:
        return fn(left->Evaluate(x));
      case Kind::kBinary: {
        const double a = left->Evaluate(x), b = right->Evaluate(x);
        switch (op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          default: return std::pow(a, b);
        }
      }
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Node = Expression::Node;

double Sin(double v) { return std::sin(v); }
double Cos(double v) { return std::cos(v); }
double Exp(double v) { return std::exp(v); }
double Sqrt(double v) { return std::sqrt(v); }
double Abs(double v) { return std::abs(v); }

class Parser {
 public:
  Parser(const std::string& text, int n, const std::map<std::string, double>& constants)
      : text_(text), n_(n), constants_(constants) {}

  NodePtr Run() {
    NodePtr e = Sum();
    Skip();
    if (pos_ < text_.size()) Fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw ExpressionError(what, static_cast<int>(pos_) + 1);
  }

  void Skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool Accept(char c) {
    Skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr Binary(char op, NodePtr a, NodePtr b) {
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::kBinary;
    node->op = op;
    node->left = std::move(a);
    node->right = std::move(b);
    return node;
  }

  NodePtr Sum() {
    NodePtr e = Product();
    for (;;) {
      if (Accept('+')) {
        e = Binary('+', e, Product());
      } else if (Accept('-')) {
        e = Binary('-', e, Product());
      } else {
        return e;
      }
    }
  }

  NodePtr Product() {
    NodePtr e = Unary();
    for (;;) {
      if (Accept('*')) {
        e = Binary('*', e, Unary());
      } else if (Accept('/')) {
        e = Binary('/', e, Unary());
      } else {
        return e;
      }
    }
  }

  NodePtr Unary() {
    if (Accept('-')) {
      auto node = std::make_shared<Node>();
      node->kind = Node::Kind::kNegate;
      node->left = Unary();
      return node;
    }
    if (Accept('+')) return Unary();
    return Power();
  }

  NodePtr Power() {
    NodePtr base = Primary();
    if (Accept('^')) return Binary('^', base, Unary());
    return base;
  }

  NodePtr Primary() {
    Skip();
    if (pos_ >= text_.size()) Fail("unexpected end of expression");
    const char c = text_[pos_];
    if (Accept('(')) {
      NodePtr e = Sum();
      if (!Accept(')')) Fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) Fail("bad number");
      pos_ += end - begin;
      auto node = std::make_shared<Node>();
      node->value = v;
      return node;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string name = text_.substr(start, pos_ - start);
      return Name(name, start);
    }
    Fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr Name(const std::string& name, size_t start) {
    static const std::map<std::string, double (*)(double)> kFunctions = {
        {"sin", Sin}, {"cos", Cos}, {"exp", Exp}, {"sqrt", Sqrt}, {"abs", Abs}};
    auto node = std::make_shared<Node>();
    if (const auto fn = kFunctions.find(name); fn != kFunctions.end()) {
      if (!Accept('(')) Fail("expected '(' after " + name);
      node->kind = Node::Kind::kCall;
      node->fn = fn->second;
      node->left = Sum();
      if (!Accept(')')) Fail("expected ')'");
      return node;
    }
    if (name.size() > 1 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int index = std::atoi(name.c_str() + 1);
      if (index < 1 || index > n_) {
        pos_ = start;
        Fail("variable " + name + " outside x1..x" + std::to_string(n_));
      }
      node->kind = Node::Kind::kVariable;
      node->index = index - 1;
      return node;
    }
    if (const auto k = constants_.find(name); k != constants_.end()) {
      node->value = k->second;
      return node;
    }
    pos_ = start;
    Fail("unknown name '" + name + "'");
  }

  const std::string& text_;
  int n_;
  const std::map<std::string, double>& constants_;
  size_t pos_ = 0;
};

}  // namespace

Expression Expression::Parse(const std::string& text, int n,
                             const std::map<std::string, double>& constants) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, n, constants).Run();
  return e;
}

double Expression::Evaluate(const Eigen::VectorXd& x) const { return root_->Evaluate(x); }

VectorExpression VectorExpression::Parse(const std::vector<std::string>& components, int n,
                                         const std::map<std::string, double>& constants) {
  VectorExpression v;
  for (const std::string& text : components) {
    v.components_.push_back(Expression::Parse(text, n, constants));
  }
  return v;
}

Eigen::VectorXd VectorExpression::Evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) out(i) = components_[i].Evaluate(x);
  return out;
}

std::vector<std::string> VectorExpression::Texts() const {
  std::vector<std::string> out;
  for (const Expression& e : components_) out.push_back(e.text());
  return out;
}

}  // namespace safelearn
