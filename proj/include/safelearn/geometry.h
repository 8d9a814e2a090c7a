#pragma once

#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "safelearn/conic.h"

namespace safelearn::geometry {

struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

// {x | H x <= b}
class Polyhedron {
 public:
  Polyhedron() = default;
  Polyhedron(Eigen::MatrixXd H, Eigen::VectorXd b);
  explicit Polyhedron(const std::vector<Halfspace>& halfspaces);

  // {x | lower <= x_i <= upper}
  static Polyhedron Box(int n, double lower, double upper);

  int dimension() const { return static_cast<int>(H_.cols()); }
  int num_halfspaces() const { return static_cast<int>(H_.rows()); }
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& b() const { return b_; }
  Halfspace halfspace(int i) const { return {H_.row(i).transpose(), b_(i)}; }

  // Largest h_i'x - b_i (positive means outside).
  double MaxViolation(const Eigen::VectorXd& x) const;

  bool operator==(const Polyhedron& other) const {
    return H_ == other.H_ && b_ == other.b_;
  }

 private:
  Eigen::MatrixXd H_;
  Eigen::VectorXd b_;
};

bool Contains(const Polyhedron& P, const Eigen::VectorXd& x, double tol);

// {x | exists y: A x + B y <= c, Aeq x + Beq y = ceq}. The equality rows are
// optional (zero rows).
struct LiftedPolyhedron {
  Eigen::MatrixXd A, B;
  Eigen::VectorXd c;
  Eigen::MatrixXd Aeq, Beq;
  Eigen::VectorXd ceq;

  LiftedPolyhedron() = default;
  LiftedPolyhedron(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::VectorXd c);
  static LiftedPolyhedron FromPolyhedron(const Polyhedron& P);

  int dimension() const { return static_cast<int>(A.cols()); }
  int lifted_dimension() const { return static_cast<int>(B.cols()); }
  void AddEqualities(const Eigen::MatrixXd& Ax, const Eigen::MatrixXd& By,
                     const Eigen::VectorXd& rhs);
  // Throws std::invalid_argument on inconsistent shapes.
  void Validate() const;
};

// A lifted polyhedron compiled to a conic feasibility program, with the
// x-coordinates at `x` and any auxiliary variables after them.
struct LiftedProgram {
  conic::ConicProgram program;
  conic::VarRange x;
};

LiftedProgram ToProgram(const LiftedPolyhedron& P);

struct GeometrySettings {
  conic::SolverSettings solver;
  double singleton_tol = 1e-6;
  double rank_tol = 1e-7;
};

enum class SupportStatus { kBounded, kUnbounded, kEmpty, kFailed };

struct SupportResult {
  SupportStatus status = SupportStatus::kFailed;
  double value = 0.0;
  Eigen::VectorXd point;  // maximizer (x-coordinates) when bounded
};

SupportResult Support(const LiftedProgram& P, const Eigen::VectorXd& d,
                      const conic::SolverSettings& settings = {});
SupportResult Support(const LiftedPolyhedron& P, const Eigen::VectorXd& d,
                      const conic::SolverSettings& settings = {});

enum class SingletonStatus { kSingleton, kNotSingleton, kEmpty, kFailed };

struct SingletonResult {
  SingletonStatus status = SingletonStatus::kFailed;
  Eigen::VectorXd point;   // midpoint when kSingleton
  Eigen::VectorXd widths;  // max - min per coordinate (inf when unbounded)
  double max_width() const;
};

SingletonResult IsSingleton(const LiftedProgram& P, double tol,
                            const conic::SolverSettings& settings = {});
SingletonResult IsSingleton(const LiftedPolyhedron& P, double tol,
                            const conic::SolverSettings& settings = {});

class BasisSet {
 public:
  BasisSet() : BasisSet(0) {}
  explicit BasisSet(int dimension, double rank_tolerance = 1e-7)
      : dimension_(dimension), rank_tolerance_(rank_tolerance) {}

  int dimension() const { return dimension_; }
  int size() const { return static_cast<int>(vectors_.size()); }
  double rank_tolerance() const { return rank_tolerance_; }
  const std::vector<Eigen::VectorXd>& vectors() const { return vectors_; }
  const Eigen::VectorXd& operator[](int i) const { return vectors_[i]; }

  // Appends x if it is independent of the current vectors; returns whether
  // it was added.
  bool TryAdd(const Eigen::VectorXd& x);
  // Rows are the vectors.
  Eigen::MatrixXd Matrix() const;

 private:
  int dimension_;
  double rank_tolerance_;
  std::vector<Eigen::VectorXd> vectors_;
};

// Smallest singular value of the row-normalized stack [basis; x] relative to
// the largest is at least the basis tolerance.
bool IndependentOf(const Eigen::VectorXd& x, const BasisSet& basis);

// Smallest-to-largest singular value ratio of the row-normalized stack of
// `vectors` (1 for an empty or single nonzero vector, 0 if any is zero).
double RelativeMinSingularValue(const std::vector<Eigen::VectorXd>& vectors);

struct SpanBasisResult {
  BasisSet basis;
  bool empty = false;  // P itself is empty
  // Witnesses: lifted coordinates y_k with A e_k + B y_k <= c.
  std::vector<Eigen::VectorXd> witnesses;
  int lp_solves = 0;
};

// A basis of span(P) made of points of P. Throws std::runtime_error when an
// LP fails to certify its status.
SpanBasisResult SpanBasis(const LiftedPolyhedron& P,
                          const GeometrySettings& settings = {});

struct Polygon {
  std::vector<Eigen::Vector2d> directions;
  std::vector<double> support;  // +inf for unbounded directions
  std::vector<Eigen::Vector2d> vertices;
  bool empty = false;
  bool unbounded = false;

  // Within the intersection of the supporting halfplanes, inflated by `tol`.
  bool Contains(const Eigen::Vector2d& p, double tol) const;
  // Every vertex of `inner` lies in this polygon inflated by `tol`.
  bool ContainsPolygon(const Polygon& inner, double tol) const;
};

// support(d) for a direction in feature space (length 2).
using SupportFunction = std::function<SupportResult(const Eigen::Vector2d&)>;

// K evenly spaced unit directions starting at angle 0.
std::vector<Eigen::Vector2d> EvenDirections(int K);

Polygon PolygonFromSupport(const SupportFunction& support, int K);

// Projection onto coordinates (dims.first, dims.second).
Polygon Project2d(const LiftedProgram& P, std::pair<int, int> dims, int K,
                  const conic::SolverSettings& settings = {});
Polygon Project2d(const LiftedPolyhedron& P, std::pair<int, int> dims, int K,
                  const conic::SolverSettings& settings = {});
// Image under the linear map x -> F x with F of size 2 x n.
Polygon ProjectLinear(const LiftedProgram& P, const Eigen::MatrixXd& F, int K,
                      const conic::SolverSettings& settings = {});

// Rows: direction_x,direction_y,support_value,vertex_x,vertex_y
void WritePolygonCsv(const Polygon& polygon, std::ostream& out);

}  // namespace safelearn::geometry
