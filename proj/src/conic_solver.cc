// Primal-dual interior-point method on the homogeneous self-dual embedding of
//
//   minimize c'x  subject to  G x + s = h,  A x = b,  s in K,
//
// where K is a product of nonnegative orthants, second-order cones and PSD
// cones (vectorized with the sqrt(2) off-diagonal scaling). Search directions
// use Nesterov-Todd scaling with a Mehrotra predictor-corrector; the reduced
// KKT system is quasidefinite and factored with a sparse LDL' after static
// regularization, followed by iterative refinement.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "safelearn/conic.h"
#include "sparse_ldl.h"

namespace safelearn::conic {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kReducedAccuracyFactor = 100.0;
const double kSqrt2 = std::sqrt(2.0);

struct ConeDims {
  int nonneg = 0;
  std::vector<int> soc;
  std::vector<int> psd;  // matrix orders

  int rows() const {
    int r = nonneg;
    for (int q : soc) r += q;
    for (int m : psd) r += m * (m + 1) / 2;
    return r;
  }
  int degree() const {
    int d = nonneg + static_cast<int>(soc.size());
    for (int m : psd) d += m;
    return d;
  }
};

// Where each user block lives in the standard form.
struct BlockPlacement {
  bool equality = false;
  int offset = 0;
};

struct StandardForm {
  int n = 0;
  SpMat A, G;
  VectorXd b, h, c;
  double c0 = 0.0;
  double sign = 1.0;
  ConeDims dims;
  std::vector<BlockPlacement> placement;
};

StandardForm Standardize(const ConicProgram& program) {
  StandardForm sf;
  sf.n = program.num_variables();
  sf.sign = program.sense() == Sense::kMinimize ? 1.0 : -1.0;
  sf.c = VectorXd::Zero(sf.n);
  for (const auto& [index, coeff] : program.objective().terms()) {
    sf.c(index) += sf.sign * coeff;
  }
  sf.c0 = sf.sign * program.objective().constant();

  const auto& blocks = program.blocks();
  sf.placement.resize(blocks.size());

  int eq_rows = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].kind == ConeKind::kZero) {
      sf.placement[k] = {true, eq_rows};
      eq_rows += static_cast<int>(blocks[k].rows.size());
    }
  }
  // Cone rows: orthant first, then second-order, then PSD.
  int cone_rows = 0;
  for (ConeKind kind :
       {ConeKind::kNonnegative, ConeKind::kSecondOrder, ConeKind::kPsd}) {
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      if (blocks[k].kind != kind) continue;
      sf.placement[k] = {false, cone_rows};
      const int size = static_cast<int>(blocks[k].rows.size());
      cone_rows += size;
      if (kind == ConeKind::kNonnegative) {
        sf.dims.nonneg += size;
      } else if (kind == ConeKind::kSecondOrder) {
        sf.dims.soc.push_back(size);
      } else {
        sf.dims.psd.push_back(blocks[k].order);
      }
    }
  }

  std::vector<Triplet> a_trip, g_trip;
  sf.b = VectorXd::Zero(eq_rows);
  sf.h = VectorXd::Zero(cone_rows);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& block = blocks[k];
    const int offset = sf.placement[k].offset;
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      const AffineExpr& row = block.rows[r];
      const int i = offset + static_cast<int>(r);
      if (block.kind == ConeKind::kZero) {
        // e(x) = a'x + k = 0  ->  a'x = -k
        for (const auto& [index, coeff] : row.terms()) {
          a_trip.emplace_back(i, index, coeff);
        }
        sf.b(i) = -row.constant();
        continue;
      }
      double scale = 1.0;
      if (block.kind == ConeKind::kPsd) {
        // Off-diagonal entries carry sqrt(2) so the vectorization is an
        // isometry.
        const int m = block.order;
        int col = 0, rem = static_cast<int>(r);
        while (rem >= m - col) {
          rem -= m - col;
          ++col;
        }
        if (rem != 0) scale = kSqrt2;
      }
      // s = e(x) = a'x + k  ->  G = -a, h = k
      for (const auto& [index, coeff] : row.terms()) {
        g_trip.emplace_back(i, index, -scale * coeff);
      }
      sf.h(i) = scale * row.constant();
    }
  }
  sf.A.resize(eq_rows, sf.n);
  sf.A.setFromTriplets(a_trip.begin(), a_trip.end());
  sf.G.resize(cone_rows, sf.n);
  sf.G.setFromTriplets(g_trip.begin(), g_trip.end());
  return sf;
}

// ---------------------------------------------------------------------------
// Cone algebra on the vectorized representation.

MatrixXd Smat(const VectorXd& v, int offset, int m) {
  MatrixXd M(m, m);
  int k = offset;
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      const double value = (i == j) ? v(k) : v(k) / kSqrt2;
      M(i, j) = value;
      M(j, i) = value;
      ++k;
    }
  }
  return M;
}

void Svec(const MatrixXd& M, VectorXd& v, int offset) {
  const int m = static_cast<int>(M.rows());
  int k = offset;
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      v(k++) = (i == j) ? M(i, i) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
    }
  }
}

class Cones {
 public:
  explicit Cones(ConeDims dims) : dims_(std::move(dims)) {}

  const ConeDims& dims() const { return dims_; }

  VectorXd Identity() const {
    VectorXd e = VectorXd::Zero(dims_.rows());
    e.head(dims_.nonneg).setOnes();
    int off = dims_.nonneg;
    for (int q : dims_.soc) {
      e(off) = 1.0;
      off += q;
    }
    for (int m : dims_.psd) {
      int k = off;
      for (int j = 0; j < m; ++j) {
        e(k) = 1.0;
        k += m - j;
      }
      off += m * (m + 1) / 2;
    }
    return e;
  }

  // Smallest t such that u + t e lies on the boundary is -MinEig(u); the
  // "minimum eigenvalue" of u with respect to the cone.
  double MinEig(const VectorXd& u) const {
    double result = kInf;
    if (dims_.nonneg > 0) result = u.head(dims_.nonneg).minCoeff();
    int off = dims_.nonneg;
    for (int q : dims_.soc) {
      result = std::min(result, u(off) - u.segment(off + 1, q - 1).norm());
      off += q;
    }
    for (int m : dims_.psd) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Smat(u, off, m),
                                                 Eigen::EigenvaluesOnly);
      result = std::min(result, es.eigenvalues()(0));
      off += m * (m + 1) / 2;
    }
    return result;
  }

  // Jordan product u o v.
  VectorXd Product(const VectorXd& u, const VectorXd& v) const {
    VectorXd w(u.size());
    const int l = dims_.nonneg;
    w.head(l) = u.head(l).cwiseProduct(v.head(l));
    int off = l;
    for (int q : dims_.soc) {
      w(off) = u.segment(off, q).dot(v.segment(off, q));
      w.segment(off + 1, q - 1) = u(off) * v.segment(off + 1, q - 1) +
                                  v(off) * u.segment(off + 1, q - 1);
      off += q;
    }
    for (int m : dims_.psd) {
      const MatrixXd U = Smat(u, off, m), V = Smat(v, off, m);
      Svec(0.5 * (U * V + V * U), w, off);
      off += m * (m + 1) / 2;
    }
    return w;
  }

  // Solves lambda o x = d, where lambda is the scaled point (diagonal in the
  // PSD blocks).
  VectorXd InverseProduct(const VectorXd& lambda, const VectorXd& d) const {
    VectorXd x(d.size());
    const int l = dims_.nonneg;
    x.head(l) = d.head(l).cwiseQuotient(lambda.head(l));
    int off = l;
    for (int q : dims_.soc) {
      const double l0 = lambda(off);
      const auto l1 = lambda.segment(off + 1, q - 1);
      const double d0 = d(off);
      const auto d1 = d.segment(off + 1, q - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * d0 - l1.dot(d1)) / det;
      x(off) = x0;
      x.segment(off + 1, q - 1) = (d1 - x0 * l1) / l0;
      off += q;
    }
    for (int m : dims_.psd) {
      int k = off;
      for (int j = 0; j < m; ++j) {
        const double lj = lambda(DiagIndex(off, m, j));
        for (int i = j; i < m; ++i) {
          const double li = lambda(DiagIndex(off, m, i));
          x(k) = 2.0 * d(k) / (li + lj);
          ++k;
        }
      }
      off += m * (m + 1) / 2;
    }
    return x;
  }

  // Largest step alpha with lambda + alpha d in the cone (lambda interior).
  double MaxStep(const VectorXd& lambda, const VectorXd& d) const {
    double alpha = kInf;
    for (int i = 0; i < dims_.nonneg; ++i) {
      if (d(i) < 0) alpha = std::min(alpha, -lambda(i) / d(i));
    }
    int off = dims_.nonneg;
    for (int q : dims_.soc) {
      alpha = std::min(alpha, SocStep(lambda.segment(off, q), d.segment(off, q)));
      off += q;
    }
    for (int m : dims_.psd) {
      MatrixXd D = Smat(d, off, m);
      VectorXd inv_sqrt(m);
      for (int i = 0; i < m; ++i) {
        inv_sqrt(i) = 1.0 / std::sqrt(lambda(DiagIndex(off, m, i)));
      }
      D = inv_sqrt.asDiagonal() * D * inv_sqrt.asDiagonal();
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(D, Eigen::EigenvaluesOnly);
      const double min_eig = es.eigenvalues()(0);
      if (min_eig < 0) alpha = std::min(alpha, -1.0 / min_eig);
      off += m * (m + 1) / 2;
    }
    return alpha;
  }

  static int DiagIndex(int offset, int m, int i) {
    return offset + i * m - i * (i - 1) / 2;
  }

 private:
  static double SocStep(const VectorXd& x, const VectorXd& d) {
    const int q = static_cast<int>(x.size());
    const auto x1 = x.tail(q - 1);
    const auto d1 = d.tail(q - 1);
    const double a = d(0) * d(0) - d1.squaredNorm();
    const double b = 2.0 * (x(0) * d(0) - x1.dot(d1));
    const double c = std::max(x(0) * x(0) - x1.squaredNorm(), 0.0);
    if (std::abs(a) < 1e-300) {
      return b < 0 ? -c / b : kInf;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0) return kInf;
    const double sq = std::sqrt(disc);
    const double t = -0.5 * (b + (b >= 0 ? sq : -sq));
    double r1 = t / a;
    double r2 = (t != 0.0) ? c / t : kInf;
    if (r1 > r2) std::swap(r1, r2);
    if (a > 0) return r1 > 0 ? r1 : kInf;
    return r2 > 0 ? r2 : kInf;
  }

  ConeDims dims_;
};

// Nesterov-Todd scaling W with W z = W^{-T} s = lambda.
class NtScaling {
 public:
  // Returns false when the point is not numerically interior.
  bool Compute(const Cones& cones, const VectorXd& s, const VectorXd& z) {
    const ConeDims& dims = cones.dims();
    lambda_.resize(s.size());
    const int l = dims.nonneg;
    lp_w_.resize(l);
    for (int i = 0; i < l; ++i) {
      if (!(s(i) > 0) || !(z(i) > 0)) return false;
      lp_w_(i) = std::sqrt(s(i) / z(i));
      lambda_(i) = std::sqrt(s(i) * z(i));
    }
    int off = l;
    soc_eta_.clear();
    soc_w_.clear();
    for (int q : dims.soc) {
      const VectorXd ss = s.segment(off, q), zz = z.segment(off, q);
      const double s_det = ss(0) * ss(0) - ss.tail(q - 1).squaredNorm();
      const double z_det = zz(0) * zz(0) - zz.tail(q - 1).squaredNorm();
      if (!(s_det > 0) || !(z_det > 0) || ss(0) <= 0 || zz(0) <= 0) {
        return false;
      }
      const double s_norm = std::sqrt(s_det), z_norm = std::sqrt(z_det);
      const VectorXd sb = ss / s_norm;
      const VectorXd zb = zz / z_norm;
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      VectorXd w(q);
      w(0) = (sb(0) + zb(0)) / (2.0 * gamma);
      w.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
      soc_w_.push_back(w);
      soc_eta_.push_back(std::sqrt(s_norm / z_norm));
      lambda_.segment(off, q) =
          soc_eta_.back() * SocApply(w, zz, /*inverse=*/false);
      off += q;
    }
    psd_r_.clear();
    psd_rinv_.clear();
    for (int m : dims.psd) {
      Eigen::LLT<MatrixXd> ls(Smat(s, off, m)), lz(Smat(z, off, m));
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
        return false;
      }
      const MatrixXd Ls = ls.matrixL(), Lz = lz.matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
      const VectorXd sv = svd.singularValues();
      if (!(sv.minCoeff() > 0)) return false;
      const VectorXd inv_sqrt = sv.cwiseSqrt().cwiseInverse();
      psd_r_.push_back(Ls * svd.matrixV() * inv_sqrt.asDiagonal());
      psd_rinv_.push_back(inv_sqrt.asDiagonal() * svd.matrixU().transpose() *
                          Lz.transpose());
      int k = off;
      for (int j = 0; j < m; ++j) {
        for (int i = j; i < m; ++i) lambda_(k++) = (i == j) ? sv(i) : 0.0;
      }
      off += m * (m + 1) / 2;
    }
    return true;
  }

  const VectorXd& lambda() const { return lambda_; }

  // mode: 0 -> W, 1 -> W', 2 -> W^{-T}
  VectorXd Apply(const Cones& cones, const VectorXd& u, int mode) const {
    const ConeDims& dims = cones.dims();
    VectorXd out(u.size());
    const int l = dims.nonneg;
    if (mode == 2) {
      out.head(l) = u.head(l).cwiseQuotient(lp_w_);
    } else {
      out.head(l) = u.head(l).cwiseProduct(lp_w_);
    }
    int off = l;
    for (std::size_t k = 0; k < dims.soc.size(); ++k) {
      const int q = dims.soc[k];
      if (mode == 2) {
        out.segment(off, q) =
            SocApply(soc_w_[k], u.segment(off, q), true) / soc_eta_[k];
      } else {
        out.segment(off, q) =
            soc_eta_[k] * SocApply(soc_w_[k], u.segment(off, q), false);
      }
      off += q;
    }
    for (std::size_t k = 0; k < dims.psd.size(); ++k) {
      const int m = dims.psd[k];
      const MatrixXd U = Smat(u, off, m);
      MatrixXd V;
      if (mode == 0) {
        V = psd_r_[k].transpose() * U * psd_r_[k];
      } else if (mode == 1) {
        V = psd_r_[k] * U * psd_r_[k].transpose();
      } else {
        V = psd_rinv_[k] * U * psd_rinv_[k].transpose();
      }
      Svec(V, out, off);
      off += m * (m + 1) / 2;
    }
    return out;
  }

  // Appends the lower triangle of W'W (block diagonal) at row/col `base`,
  // scaled by -1, plus -reg on the diagonal.
  void AppendNegHessian(const Cones& cones, int base, double reg,
                        std::vector<Triplet>& trip) const {
    const ConeDims& dims = cones.dims();
    const int l = dims.nonneg;
    for (int i = 0; i < l; ++i) {
      trip.emplace_back(base + i, base + i, -(lp_w_(i) * lp_w_(i)) - reg);
    }
    int off = l;
    for (std::size_t k = 0; k < dims.soc.size(); ++k) {
      const int q = dims.soc[k];
      const VectorXd& w = soc_w_[k];
      const double eta2 = soc_eta_[k] * soc_eta_[k];
      // W'W = eta^2 (2 w w' - J)
      for (int j = 0; j < q; ++j) {
        for (int i = j; i < q; ++i) {
          double v = 2.0 * w(i) * w(j);
          if (i == j) v += (i == 0) ? -1.0 : 1.0;
          v *= eta2;
          if (i == j) v += reg;
          trip.emplace_back(base + off + i, base + off + j, -v);
        }
      }
      off += q;
    }
    for (std::size_t k = 0; k < dims.psd.size(); ++k) {
      const int m = dims.psd[k];
      const int t = m * (m + 1) / 2;
      const MatrixXd P = psd_r_[k] * psd_r_[k].transpose();
      VectorXd unit = VectorXd::Zero(t), col(t);
      for (int c = 0; c < t; ++c) {
        unit.setZero();
        unit(c) = 1.0;
        const MatrixXd E = Smat(unit, 0, m);
        Svec(P * E * P, col, 0);
        for (int r = c; r < t; ++r) {
          double v = col(r);
          if (r == c) v += reg;
          trip.emplace_back(base + off + r, base + off + c, -v);
        }
      }
      off += t;
    }
  }

  VectorXd ApplyHessian(const Cones& cones, const VectorXd& u) const {
    return Apply(cones, Apply(cones, u, 0), 1);
  }

 private:
  // W_bar u (or its inverse) for a unit hyperbolic w.
  static VectorXd SocApply(const VectorXd& w, const VectorXd& u, bool inverse) {
    const int q = static_cast<int>(w.size());
    const double sgn = inverse ? -1.0 : 1.0;
    const auto w1 = w.tail(q - 1);
    const auto u1 = u.tail(q - 1);
    const double w1u1 = w1.dot(u1);
    VectorXd out(q);
    out(0) = w(0) * u(0) + sgn * w1u1;
    out.tail(q - 1) = u1 + (sgn * u(0) + w1u1 / (1.0 + w(0))) * w1;
    return out;
  }

  VectorXd lambda_;
  VectorXd lp_w_;
  std::vector<double> soc_eta_;
  std::vector<VectorXd> soc_w_;
  std::vector<MatrixXd> psd_r_, psd_rinv_;
};

// Quasidefinite KKT system
//   [ reg I   A'       G'          ]
//   [ A      -reg I    0           ]
//   [ G       0       -W'W - reg I ]
class KktSolver {
 public:
  KktSolver(const StandardForm& sf, const Cones& cones, double reg,
            int refinement)
      : sf_(sf), cones_(cones), reg_(reg), refinement_(refinement) {
    n_ = sf.n;
    p_ = static_cast<int>(sf.A.rows());
    m_ = static_cast<int>(sf.G.rows());
    for (int k = 0; k < sf.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.A, k); it; ++it) {
        fixed_.emplace_back(n_ + it.row(), it.col(), it.value());
      }
    }
    for (int k = 0; k < sf.G.outerSize(); ++k) {
      for (SpMat::InnerIterator it(sf.G, k); it; ++it) {
        fixed_.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
      }
    }
    for (int i = 0; i < n_; ++i) fixed_.emplace_back(i, i, reg_);
    for (int i = 0; i < p_; ++i) fixed_.emplace_back(n_ + i, n_ + i, -reg_);
  }

  bool Factor(const NtScaling* scaling) {
    std::vector<Triplet> trip = fixed_;
    scaling->AppendNegHessian(cones_, n_ + p_, reg_, trip);
    const int size = n_ + p_ + m_;
    SpMat K(size, size);
    K.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      std::vector<int> signs(size, -1);
      std::fill(signs.begin(), signs.begin() + n_, 1);
      ldl_.Analyze(K, signs);
      analyzed_ = true;
    }
    scaling_ = scaling;
    return ldl_.Factor(K);
  }

  // Solves the unregularized system by refinement around the regularized
  // factorization.
  VectorXd Solve(const VectorXd& rhs) const {
    VectorXd u = ldl_.Solve(rhs);
    const double rhs_norm = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    for (int it = 0; it < refinement_; ++it) {
      const VectorXd r = rhs - Multiply(u);
      if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * rhs_norm) break;
      u += ldl_.Solve(r);
    }
    return u;
  }

 private:
  VectorXd Multiply(const VectorXd& u) const {
    const VectorXd x = u.head(n_), y = u.segment(n_, p_), z = u.tail(m_);
    VectorXd out(u.size());
    out.head(n_) = sf_.A.transpose() * y + sf_.G.transpose() * z;
    out.segment(n_, p_) = sf_.A * x;
    out.tail(m_) = sf_.G * x - scaling_->ApplyHessian(cones_, z);
    return out;
  }

  const StandardForm& sf_;
  const Cones& cones_;
  double reg_;
  int refinement_;
  int n_ = 0, p_ = 0, m_ = 0;
  std::vector<Triplet> fixed_;
  internal::SparseLdl ldl_;
  bool analyzed_ = false;
  const NtScaling* scaling_ = nullptr;
};

struct Iterate {
  VectorXd x, y, z, s;
  double tau = 1.0, kappa = 1.0;
};

Solution Finish(const ConicProgram& program, const StandardForm& sf,
                const Iterate& it, SolveStatus status,
                const SolveStats& stats) {
  Solution sol;
  sol.status = status;
  sol.stats = stats;
  const auto& blocks = program.blocks();
  double scale = 1.0;
  if (status == SolveStatus::kOptimal) scale = 1.0 / it.tau;
  sol.primal = it.x * scale;
  sol.dual.resize(blocks.size());
  sol.slack.resize(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& block = blocks[k];
    const int size = static_cast<int>(block.rows.size());
    const int off = sf.placement[k].offset;
    if (sf.placement[k].equality) {
      // Internal multiplier enters as +y'(a'x); report f - y'e convention.
      sol.dual[k] = -it.y.segment(off, size) * scale;
      sol.slack[k] = VectorXd::Zero(size);
      continue;
    }
    VectorXd z = it.z.segment(off, size) * scale;
    VectorXd s = it.s.segment(off, size) * scale;
    if (block.kind == ConeKind::kPsd) {
      int r = 0;
      for (int j = 0; j < block.order; ++j) {
        for (int i = j; i < block.order; ++i) {
          if (i != j) {
            z(r) /= kSqrt2;
            s(r) /= kSqrt2;
          }
          ++r;
        }
      }
    }
    sol.dual[k] = z;
    sol.slack[k] = s;
  }
  if (status == SolveStatus::kOptimal) {
    const double pcost = sf.c.dot(sol.primal) + sf.c0;
    const double dcost =
        -(sf.b.dot(it.y) + sf.h.dot(it.z)) * scale + sf.c0;
    sol.objective_value = sf.sign * pcost;
    sol.dual_objective_value = sf.sign * dcost;
  } else if (status == SolveStatus::kInfeasible) {
    sol.objective_value = sf.sign * kInf;
    sol.dual_objective_value = sol.objective_value;
  } else if (status == SolveStatus::kUnbounded) {
    sol.objective_value = -sf.sign * kInf;
    sol.dual_objective_value = sol.objective_value;
  } else {
    sol.objective_value = std::numeric_limits<double>::quiet_NaN();
    sol.dual_objective_value = sol.objective_value;
  }
  return sol;
}

}  // namespace

Solution Solve(const ConicProgram& program, const SolverSettings& settings) {
  const StandardForm sf = Standardize(program);
  const Cones cones(sf.dims);
  const int n = sf.n;
  const int p = static_cast<int>(sf.A.rows());
  const int m = static_cast<int>(sf.G.rows());
  const int nu = sf.dims.degree();

  const double b_norm = std::max(
      1.0, std::sqrt(sf.b.squaredNorm() + sf.h.squaredNorm()));
  const double c_norm = std::max(1.0, sf.c.norm());

  KktSolver kkt(sf, cones, settings.static_regularization,
                settings.refinement_steps);
  SolveStats stats;
  Iterate it;

  // Initial point from two least-squares problems with W = I. The identity
  // scaling keeps the sparsity pattern of later factorizations.
  NtScaling identity;
  identity.Compute(cones, cones.Identity(), cones.Identity());
  if (!kkt.Factor(&identity)) {
    return Finish(program, sf, {VectorXd::Zero(n), VectorXd::Zero(p),
                                VectorXd::Zero(m), VectorXd::Zero(m)},
                  SolveStatus::kNumericalFailure, stats);
  }
  {
    VectorXd rhs(n + p + m);
    rhs << VectorXd::Zero(n), sf.b, sf.h;
    const VectorXd u = kkt.Solve(rhs);
    it.x = u.head(n);
    it.s = -u.tail(m);
    rhs << -sf.c, VectorXd::Zero(p), VectorXd::Zero(m);
    const VectorXd v = kkt.Solve(rhs);
    it.y = v.segment(n, p);
    it.z = v.tail(m);
    const VectorXd e = cones.Identity();
    if (m > 0) {
      const double alpha_s = -cones.MinEig(it.s);
      if (alpha_s >= -1e-8 * std::max(1.0, it.s.norm())) {
        it.s += (1.0 + alpha_s) * e;
      }
      const double alpha_z = -cones.MinEig(it.z);
      if (alpha_z >= -1e-8 * std::max(1.0, it.z.norm())) {
        it.z += (1.0 + alpha_z) * e;
      }
    }
  }

  const VectorXd e = cones.Identity();
  NtScaling scaling;
  SolveStatus status = SolveStatus::kNumericalFailure;
  Iterate best;
  SolveStats best_stats;
  double best_merit = kInf;
  double best_pinf = kInf, best_dinf = kInf;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    stats.iterations = iter;
    // Residuals of the embedding.
    const VectorXd rx = sf.A.transpose() * it.y + sf.G.transpose() * it.z +
                        sf.c * it.tau;
    const VectorXd ry = -(sf.A * it.x) + sf.b * it.tau;
    const VectorXd rz = -(sf.G * it.x) + sf.h * it.tau - it.s;
    const double cx = sf.c.dot(it.x);
    const double by_hz = sf.b.dot(it.y) + sf.h.dot(it.z);
    const double rtau = -cx - by_hz - it.kappa;

    const double sz = it.s.dot(it.z);
    const double mu = (sz + it.tau * it.kappa) / (nu + 1);

    // Convergence tests.
    const double pres =
        std::sqrt(ry.squaredNorm() + rz.squaredNorm()) / it.tau / b_norm;
    const double dres = rx.norm() / it.tau / c_norm;
    const double pcost = cx / it.tau;
    const double dcost = -by_hz / it.tau;
    const double gap = sz / (it.tau * it.tau);
    stats.primal_residual = pres;
    stats.dual_residual = dres;
    stats.gap = std::abs(pcost - dcost);
    if (settings.verbose) {
      std::cerr << std::scientific << std::setprecision(3) << iter << " pcost "
                << pcost << " dcost " << dcost << " gap " << gap << " pres "
                << pres << " dres " << dres << " tau " << it.tau << " kappa "
                << it.kappa << '\n';
    }
    const double gap_scale = std::max(1.0, std::min(std::abs(pcost),
                                                    std::abs(dcost)));
    const double merit =
        std::max({pres / settings.feas_tol, dres / settings.feas_tol,
                  std::abs(pcost - dcost) / (settings.gap_tol * gap_scale),
                  gap / (settings.gap_tol * gap_scale)});
    if (merit <= 1.0) {
      status = SolveStatus::kOptimal;
      break;
    }
    if (merit < best_merit) {
      best_merit = merit;
      best = it;
      best_stats = stats;
    }
    if (by_hz < 0) {
      const double pinf = (sf.A.transpose() * it.y + sf.G.transpose() * it.z)
                              .norm() /
                          c_norm / (-by_hz);
      best_pinf = std::min(best_pinf, pinf / settings.feas_tol);
      if (pinf <= settings.feas_tol) {
        status = SolveStatus::kInfeasible;
        break;
      }
    }
    if (cx < 0) {
      const VectorXd ax = sf.A * it.x;
      const VectorXd gxs = sf.G * it.x + it.s;
      const double dinf =
          std::sqrt(ax.squaredNorm() + gxs.squaredNorm()) / b_norm / (-cx);
      best_dinf = std::min(best_dinf, dinf / settings.feas_tol);
      if (dinf <= settings.feas_tol) {
        status = SolveStatus::kUnbounded;
        break;
      }
    }
    if (iter == settings.max_iterations) break;

    if (!scaling.Compute(cones, it.s, it.z)) break;
    if (!kkt.Factor(&scaling)) break;
    const VectorXd& lambda = scaling.lambda();

    VectorXd q(n + p + m);
    q << sf.c, -sf.b, -sf.h;
    const VectorXd u2 = kkt.Solve(q);
    const double denom_base = sf.c.dot(u2.head(n)) +
                              sf.b.dot(u2.segment(n, p)) +
                              sf.h.dot(u2.tail(m));

    auto direction = [&](double sigma, const VectorXd& ds, double dkappa,
                         VectorXd& dx, VectorXd& dy, VectorXd& dz,
                         VectorXd& dsv, double& dtau, double& dk) {
      const VectorXd w_ds = scaling.Apply(cones, cones.InverseProduct(lambda, ds), 1);
      VectorXd rhs(n + p + m);
      rhs << -(1.0 - sigma) * rx, (1.0 - sigma) * ry,
          (1.0 - sigma) * rz - w_ds;
      const VectorXd u1 = kkt.Solve(rhs);
      const double p4 = -(1.0 - sigma) * rtau + dkappa / it.tau;
      dtau = (p4 + sf.c.dot(u1.head(n)) + sf.b.dot(u1.segment(n, p)) +
              sf.h.dot(u1.tail(m))) /
             (denom_base + it.kappa / it.tau);
      const VectorXd u = u1 - dtau * u2;
      dx = u.head(n);
      dy = u.segment(n, p);
      dz = u.tail(m);
      dsv = w_ds - scaling.ApplyHessian(cones, dz);
      dk = (dkappa - it.kappa * dtau) / it.tau;
    };

    auto step_length = [&](const VectorXd& dsv, const VectorXd& dz,
                           double dtau, double dk) {
      double alpha = 1e300;
      if (m > 0) {
        alpha = std::min(alpha,
                         cones.MaxStep(lambda, scaling.Apply(cones, dsv, 2)));
        alpha = std::min(alpha,
                         cones.MaxStep(lambda, scaling.Apply(cones, dz, 0)));
      }
      if (dtau < 0) alpha = std::min(alpha, -it.tau / dtau);
      if (dk < 0) alpha = std::min(alpha, -it.kappa / dk);
      return alpha;
    };

    // Predictor.
    VectorXd dx, dy, dz, dsv;
    double dtau = 0, dk = 0;
    const VectorXd lambda_sq = cones.Product(lambda, lambda);
    direction(0.0, -lambda_sq, -it.tau * it.kappa, dx, dy, dz, dsv, dtau, dk);
    const double alpha_aff = std::min(1.0, step_length(dsv, dz, dtau, dk));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector.
    const VectorXd ds_corr =
        -lambda_sq -
        cones.Product(scaling.Apply(cones, dsv, 2), scaling.Apply(cones, dz, 0)) +
        sigma * mu * e;
    const double dk_corr = -it.tau * it.kappa - dtau * dk + sigma * mu;
    direction(sigma, ds_corr, dk_corr, dx, dy, dz, dsv, dtau, dk);
    const double alpha =
        std::min(1.0, 0.99 * step_length(dsv, dz, dtau, dk));
    if (!(alpha > 1e-12)) break;

    it.x += alpha * dx;
    it.y += alpha * dy;
    it.z += alpha * dz;
    it.s += alpha * dsv;
    it.tau += alpha * dtau;
    it.kappa += alpha * dk;
    if (!std::isfinite(it.tau) || !(it.tau > 0) || !(it.kappa > 0)) break;
  }
  if (status == SolveStatus::kNumericalFailure) {
    const double closest = std::min({best_merit, best_pinf, best_dinf});
    if (closest <= kReducedAccuracyFactor) {
      if (closest == best_merit) {
        best_stats.reduced_accuracy = true;
        return Finish(program, sf, best, SolveStatus::kOptimal, best_stats);
      }
      stats.reduced_accuracy = true;
      status = closest == best_pinf ? SolveStatus::kInfeasible
                                    : SolveStatus::kUnbounded;
    }
  }
  return Finish(program, sf, it, status, stats);
}

}  // namespace safelearn::conic
