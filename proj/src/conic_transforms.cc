#include "safelearn/conic_transforms.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace safelearn::conic {

void QuadraticForm::Validate(double symmetry_tol) const {
  if (Q.rows() != Q.cols() || Q.rows() != q.size()) {
    throw std::invalid_argument("QuadraticForm: inconsistent dimensions");
  }
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() >
      symmetry_tol * std::max(1.0, Q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("QuadraticForm: Q is not symmetric");
  }
}

Eigen::MatrixXd QuadraticNonnegToPsd(const QuadraticForm& form) {
  const int m = form.dimension();
  Eigen::MatrixXd block(m + 1, m + 1);
  block(0, 0) = form.r;
  block.block(1, 0, m, 1) = 0.5 * form.q;
  block.block(0, 1, 1, m) = 0.5 * form.q.transpose();
  block.block(1, 1, m, m) = 0.5 * (form.Q + form.Q.transpose());
  return block;
}

AffineQuadraticForm::AffineQuadraticForm(int dimension)
    : Q(dimension, std::vector<AffineExpr>(dimension)), q(dimension) {}

BlockId AddQuadraticNonneg(ConicProgram& program,
                           const AffineQuadraticForm& form, std::string name) {
  const int m = form.dimension();
  std::vector<std::vector<AffineExpr>> block(m + 1,
                                             std::vector<AffineExpr>(m + 1));
  block[0][0] = form.r;
  for (int i = 0; i < m; ++i) {
    block[i + 1][0] = 0.5 * form.q[i];
    for (int j = 0; j <= i; ++j) block[i + 1][j + 1] = form.Q[i][j];
  }
  return program.AddPsd(block, std::move(name));
}

NormOrder NormOrder::Rational(long num, long den) {
  if (den <= 0 || num < den) {
    throw std::invalid_argument("p-norm order must be a rational >= 1");
  }
  const long g = std::gcd(num, den);
  return {num / g, den / g, false};
}

NormOrder NormOrder::FromDouble(double p) {
  if (std::isinf(p) && p > 0) return Infinity();
  if (!(p >= 1.0)) throw std::invalid_argument("p-norm order must be >= 1");
  long best_num = std::lround(p), best_den = 1;
  double best_err = std::abs(p - static_cast<double>(best_num));
  for (long den = 2; den <= 64 && best_err > 1e-12; ++den) {
    const long num = std::lround(p * den);
    const double err = std::abs(p - static_cast<double>(num) / den);
    if (err < best_err - 1e-15) {
      best_err = err;
      best_num = num;
      best_den = den;
    }
  }
  return Rational(best_num, best_den);
}

double NormOrder::value() const {
  return infinite ? std::numeric_limits<double>::infinity()
                  : static_cast<double>(num) / static_cast<double>(den);
}

std::string NormOrder::ToString() const {
  if (infinite) return "inf";
  std::ostringstream os;
  os << num;
  if (den != 1) os << '/' << den;
  return os.str();
}

double PNorm(const Eigen::VectorXd& x, const NormOrder& p) {
  if (p.infinite) return x.lpNorm<Eigen::Infinity>();
  if (p.num == 1 && p.den == 1) return x.lpNorm<1>();
  if (p.num == 2 && p.den == 1) return x.norm();
  const double pv = p.value();
  const double scale = x.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < x.size(); ++i) sum += std::pow(std::abs(x(i)) / scale, pv);
  return scale * std::pow(sum, 1.0 / pv);
}

void AddGeometricMean(ConicProgram& program, const std::vector<AffineExpr>& w,
                      const std::vector<long>& weights, long denominator,
                      const AffineExpr& s, std::vector<BlockId>& blocks) {
  if (w.size() != weights.size()) {
    throw std::invalid_argument("AddGeometricMean: size mismatch");
  }
  long leaves = 1;
  while (leaves < denominator) leaves *= 2;
  // Leaves: each w_i repeated weights_i times, s repeated for the remainder
  // (s <= g(w)^(den/leaves) s^(1 - den/leaves) with s >= 0 is equivalent).
  std::vector<AffineExpr> level;
  level.reserve(leaves);
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (long k = 0; k < weights[i]; ++k) level.push_back(w[i]);
  }
  for (long k = denominator; k < leaves; ++k) level.push_back(s);
  if (static_cast<long>(level.size()) != leaves) {
    throw std::invalid_argument("AddGeometricMean: weights must sum to den");
  }
  blocks.push_back(program.AddNonnegative({s}, "geomean_target"));
  if (leaves == 1) {
    blocks.push_back(program.AddLessEqual(s, level[0], "geomean_leaf"));
    return;
  }
  while (level.size() > 1) {
    std::vector<AffineExpr> next;
    next.reserve(level.size() / 2);
    for (std::size_t k = 0; k + 1 < level.size(); k += 2) {
      // c^2 <= a b, a, b >= 0  <=>  ||(a - b, 2c)|| <= a + b
      const VarRange c = program.AddVariables(1, "geomean_node");
      const AffineExpr cv = AffineExpr::Var(c[0]);
      blocks.push_back(program.AddSecondOrderCone(
          {level[k] + level[k + 1], level[k] - level[k + 1], 2.0 * cv},
          "geomean"));
      next.push_back(cv);
    }
    level = std::move(next);
  }
  blocks.push_back(program.AddLessEqual(s, level[0], "geomean_root"));
}

Epigraph AddPnormPowerEpigraph(ConicProgram& program,
                               const std::vector<AffineExpr>& x,
                               const NormOrder& p, int d) {
  if (d < 0) throw std::invalid_argument("epigraph power must be >= 0");
  if (!p.infinite && (p.den <= 0 || p.num < p.den)) {
    throw std::invalid_argument("p-norm order must be >= 1");
  }
  Epigraph epi;
  const VarRange t = program.AddVariables(1, "epigraph_t");
  epi.t = t[0];
  const AffineExpr tv = AffineExpr::Var(epi.t);
  if (d == 0) {
    epi.blocks.push_back(program.AddLessEqual(1.0, tv, "epigraph_d0"));
    return epi;
  }
  const int n = static_cast<int>(x.size());
  // N >= ||x||_p (or N = t when d == 1).
  AffineExpr norm_bound = tv;
  if (d > 1) {
    const VarRange nv = program.AddVariables(1, "norm_bound");
    norm_bound = AffineExpr::Var(nv[0]);
  }
  if (p.infinite) {
    std::vector<AffineExpr> rows;
    for (const auto& xi : x) {
      rows.push_back(norm_bound - xi);
      rows.push_back(norm_bound + xi);
    }
    if (n == 0) rows.push_back(norm_bound);
    epi.blocks.push_back(program.AddNonnegative(std::move(rows), "inf_norm"));
  } else if (p.num == 1 && p.den == 1) {
    const VarRange u = program.AddVariables(n, "abs");
    std::vector<AffineExpr> rows;
    AffineExpr sum;
    for (int i = 0; i < n; ++i) {
      const AffineExpr ui = AffineExpr::Var(u[i]);
      rows.push_back(ui - x[i]);
      rows.push_back(ui + x[i]);
      sum += ui;
    }
    rows.push_back(norm_bound - sum);
    epi.blocks.push_back(program.AddNonnegative(std::move(rows), "one_norm"));
  } else if (p.num == 2 && p.den == 1) {
    std::vector<AffineExpr> rows{norm_bound};
    rows.insert(rows.end(), x.begin(), x.end());
    epi.blocks.push_back(program.AddSecondOrderCone(std::move(rows), "two_norm"));
  } else {
    // ||x||_p <= N  <=>  exists r >= 0 with sum r <= N and
    // |x_i| <= r_i^(1/p) N^(1 - 1/p).
    const VarRange u = program.AddVariables(n, "abs");
    const VarRange r = program.AddVariables(n, "power_split");
    std::vector<AffineExpr> rows;
    AffineExpr sum;
    for (int i = 0; i < n; ++i) {
      const AffineExpr ui = AffineExpr::Var(u[i]);
      rows.push_back(ui - x[i]);
      rows.push_back(ui + x[i]);
      sum += AffineExpr::Var(r[i]);
    }
    rows.push_back(norm_bound - sum);
    epi.blocks.push_back(program.AddNonnegative(std::move(rows), "p_norm"));
    // 1/p = den/num
    for (int i = 0; i < n; ++i) {
      AddGeometricMean(program, {AffineExpr::Var(r[i]), norm_bound},
                       {p.den, p.num - p.den}, p.num, AffineExpr::Var(u[i]),
                       epi.blocks);
    }
  }
  if (d > 1) {
    // N <= t^(1/d) * 1^(1 - 1/d)
    AddGeometricMean(program, {tv, AffineExpr(1.0)}, {1, d - 1}, d,
                     norm_bound, epi.blocks);
  }
  return epi;
}

}  // namespace safelearn::conic
