#include "safelearn/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "safelearn/expression.h"

namespace safelearn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::ordered_json;

std::string ToString(Mode mode) {
  switch (mode) {
    case Mode::kLinear1: return "linear1";
    case Mode::kLinear2: return "linear2";
    case Mode::kNonlinear1: return "nonlinear1";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool Same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

int LineAt(const std::string& text, size_t pos) {
  pos = std::min(pos, text.size());
  int line = 1;
  for (size_t i = 0; i < pos; ++i) line += text[i] == '\n';
  return line;
}

// Reads the document and turns semantic errors into line-anchored ones by
// searching for the keys of the current path in order.
class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void Fail(const std::vector<std::string>& path, const std::string& what,
                         const std::string& needle = "") const {
    std::string where;
    for (const std::string& key : path) where += (where.empty() ? "" : ".") + key;
    throw ConfigError((where.empty() ? "" : where + ": ") + what, Locate(path, needle));
  }

  int Locate(const std::vector<std::string>& path, const std::string& needle) const {
    size_t pos = 0;
    bool found = false;
    for (const std::string& key : path) {
      const size_t at = text_.find("\"" + key + "\"", pos);
      if (at == std::string::npos) break;
      pos = at;
      found = true;
    }
    if (!needle.empty()) {
      const size_t at = text_.find(needle, pos);
      if (at != std::string::npos) return LineAt(text_, at);
    }
    return found ? LineAt(text_, pos) : 0;
  }

  double Number(const json& j, const std::vector<std::string>& path) const {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      const std::string s = j.get<std::string>();
      if (s == "inf") return kInf;
      if (s == "-inf") return -kInf;
    }
    Fail(path, "expected a number");
  }

  int Integer(const json& j, const std::vector<std::string>& path) const {
    if (!j.is_number_integer()) Fail(path, "expected an integer");
    return j.get<int>();
  }

  bool Bool(const json& j, const std::vector<std::string>& path) const {
    if (!j.is_boolean()) Fail(path, "expected true or false");
    return j.get<bool>();
  }

  std::string String(const json& j, const std::vector<std::string>& path) const {
    if (!j.is_string()) Fail(path, "expected a string");
    return j.get<std::string>();
  }

  VectorXd Vector(const json& j, const std::vector<std::string>& path) const {
    if (!j.is_array()) Fail(path, "expected an array of numbers");
    VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(i) = Number(j[i], path);
    return v;
  }

  MatrixXd Matrix(const json& j, const std::vector<std::string>& path) const {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
      Fail(path, "expected a matrix (array of rows)");
    }
    const size_t cols = j[0].size();
    MatrixXd M(j.size(), cols);
    for (size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_array() || j[i].size() != cols) Fail(path, "rows differ in length");
      for (size_t k = 0; k < cols; ++k) M(i, k) = Number(j[i][k], path);
    }
    return M;
  }

  // A scalar broadcast to n x n, or an n x n matrix.
  MatrixXd Entries(const json& j, int n, const std::vector<std::string>& path) const {
    if (j.is_number() || j.is_string()) return MatrixXd::Constant(n, n, Number(j, path));
    MatrixXd M = Matrix(j, path);
    if (M.rows() != n || M.cols() != n) Fail(path, "expected an n x n matrix");
    return M;
  }

  void Keys(const json& j, const std::vector<std::string>& path,
            const std::set<std::string>& allowed) const {
    if (!j.is_object()) Fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (!allowed.count(key)) {
        std::vector<std::string> at = path;
        at.push_back(key);
        Fail(at, "unknown key");
      }
    }
  }

 private:
  const std::string& text_;
};

json NumberJson(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return v;
}

json VectorJson(const VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(NumberJson(v(i)));
  return out;
}

json MatrixJson(const MatrixXd& M) {
  json out = json::array();
  for (int i = 0; i < M.rows(); ++i) out.push_back(VectorJson(M.row(i).transpose()));
  return out;
}

Mode ParseMode(const std::string& s, const Reader& r) {
  if (s == "linear1") return Mode::kLinear1;
  if (s == "linear2") return Mode::kLinear2;
  if (s == "nonlinear1") return Mode::kNonlinear1;
  r.Fail({"mode"}, "unknown mode '" + s + "' (linear1, linear2, nonlinear1)");
}

PriorSpec ParsePrior(const json& j, int n, const Reader& r) {
  const std::vector<std::string> path = {"prior"};
  r.Keys(j, path, {"bounded", "box", "constraints", "frobenius_ball", "ellipsoid"});
  if (j.size() != 1) r.Fail(path, "expected exactly one prior kind");
  PriorSpec prior;
  const std::string kind = j.begin().key();
  const json& body = j.begin().value();
  const std::vector<std::string> at = {"prior", kind};
  if (kind == "bounded") {
    prior.kind = PriorSpec::Kind::kBounded;
    prior.bound = r.Number(body, at);
    if (!(prior.bound >= 0.0) || std::isinf(prior.bound)) r.Fail(at, "bound must be finite and >= 0");
  } else if (kind == "box") {
    prior.kind = PriorSpec::Kind::kBox;
    r.Keys(body, at, {"lower", "upper"});
    if (!body.contains("lower") || !body.contains("upper")) r.Fail(at, "needs lower and upper");
    prior.lower = r.Entries(body["lower"], n, {"prior", "box", "lower"});
    prior.upper = r.Entries(body["upper"], n, {"prior", "box", "upper"});
    if ((prior.lower.array() > prior.upper.array()).any()) r.Fail(at, "lower exceeds upper");
  } else if (kind == "constraints") {
    prior.kind = PriorSpec::Kind::kConstraints;
    if (!body.is_array() || body.empty()) r.Fail(at, "expected a nonempty array");
    for (const json& item : body) {
      r.Keys(item, at, {"V", "v"});
      if (!item.contains("V") || !item.contains("v")) r.Fail(at, "each entry needs V and v");
      linear::MatrixConstraint con;
      con.V = r.Entries(item["V"], n, {"prior", "constraints", "V"});
      con.v = r.Number(item["v"], {"prior", "constraints", "v"});
      prior.constraints.push_back(con);
    }
  } else if (kind == "frobenius_ball") {
    prior.kind = PriorSpec::Kind::kFrobeniusBall;
    r.Keys(body, at, {"center", "radius"});
    if (!body.contains("center") || !body.contains("radius")) r.Fail(at, "needs center and radius");
    prior.center = r.Entries(body["center"], n, {"prior", kind, "center"});
    prior.radius = r.Number(body["radius"], {"prior", kind, "radius"});
    if (!(prior.radius >= 0.0) || std::isinf(prior.radius)) r.Fail(at, "radius must be finite and >= 0");
  } else {
    prior.kind = PriorSpec::Kind::kEllipsoid;
    r.Keys(body, at, {"Q", "q", "r"});
    if (!body.contains("Q") || !body.contains("q") || !body.contains("r")) {
      r.Fail(at, "needs Q, q and r");
    }
    prior.form.Q = r.Matrix(body["Q"], {"prior", kind, "Q"});
    prior.form.q = r.Vector(body["q"], {"prior", kind, "q"});
    prior.form.r = r.Number(body["r"], {"prior", kind, "r"});
    if (prior.form.Q.rows() != n * n || prior.form.Q.cols() != n * n ||
        prior.form.q.size() != n * n) {
      r.Fail(at, "Q must be n^2 x n^2 and q of length n^2");
    }
  }
  return prior;
}

json PriorJson(const PriorSpec& prior) {
  json out = json::object();
  switch (prior.kind) {
    case PriorSpec::Kind::kBounded:
      out["bounded"] = prior.bound;
      break;
    case PriorSpec::Kind::kBox:
      out["box"] = {{"lower", MatrixJson(prior.lower)}, {"upper", MatrixJson(prior.upper)}};
      break;
    case PriorSpec::Kind::kConstraints: {
      json list = json::array();
      for (const auto& con : prior.constraints) {
        list.push_back({{"V", MatrixJson(con.V)}, {"v", NumberJson(con.v)}});
      }
      out["constraints"] = list;
      break;
    }
    case PriorSpec::Kind::kFrobeniusBall:
      out["frobenius_ball"] = {{"center", MatrixJson(prior.center)}, {"radius", prior.radius}};
      break;
    case PriorSpec::Kind::kEllipsoid:
      out["ellipsoid"] = {{"Q", MatrixJson(prior.form.Q)},
                          {"q", VectorJson(prior.form.q)},
                          {"r", prior.form.r}};
      break;
  }
  return out;
}

bool SamePrior(const PriorSpec& a, const PriorSpec& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case PriorSpec::Kind::kBounded:
      return a.bound == b.bound;
    case PriorSpec::Kind::kBox:
      return Same(a.lower, b.lower) && Same(a.upper, b.upper);
    case PriorSpec::Kind::kConstraints:
      if (a.constraints.size() != b.constraints.size()) return false;
      for (size_t i = 0; i < a.constraints.size(); ++i) {
        if (!Same(a.constraints[i].V, b.constraints[i].V) ||
            a.constraints[i].v != b.constraints[i].v) {
          return false;
        }
      }
      return true;
    case PriorSpec::Kind::kFrobeniusBall:
      return Same(a.center, b.center) && a.radius == b.radius;
    case PriorSpec::Kind::kEllipsoid:
      return Same(a.form.Q, b.form.Q) && Same(a.form.q, b.form.q) && a.form.r == b.form.r;
  }
  return false;
}

double DefaultTol(Mode mode) { return mode == Mode::kLinear1 ? 1e-8 : 1e-7; }

ExperimentConfig FromJson(const json& j, const Reader& r) {
  r.Keys(j, {}, {"name", "mode", "n", "safety", "prior", "nonlinear", "cost", "epsilon",
                 "system", "seeds", "steps", "max_trajectories", "offline", "snapshots",
                 "validation", "fit", "solver"});
  for (const char* key : {"mode", "n", "safety", "prior", "cost", "system"}) {
    if (!j.contains(key)) r.Fail({}, std::string("missing required key '") + key + "'");
  }
  ExperimentConfig cfg;
  if (j.contains("name")) cfg.name = r.String(j["name"], {"name"});
  cfg.mode = ParseMode(r.String(j["mode"], {"mode"}), r);
  cfg.n = r.Integer(j["n"], {"n"});
  if (cfg.n < 1) r.Fail({"n"}, "must be positive");
  const int n = cfg.n;

  const json& safety = j["safety"];
  r.Keys(safety, {"safety"}, {"box", "H", "b"});
  if (safety.contains("box")) {
    if (safety.contains("H") || safety.contains("b")) r.Fail({"safety"}, "give box or H and b");
    const VectorXd box = r.Vector(safety["box"], {"safety", "box"});
    if (box.size() != 2 || !(box(0) < box(1))) {
      r.Fail({"safety", "box"}, "expected [lower, upper] with lower < upper");
    }
    cfg.safety = geometry::Polyhedron::Box(n, box(0), box(1));
  } else {
    if (!safety.contains("H") || !safety.contains("b")) r.Fail({"safety"}, "needs H and b");
    const MatrixXd H = r.Matrix(safety["H"], {"safety", "H"});
    const VectorXd b = r.Vector(safety["b"], {"safety", "b"});
    if (H.cols() != n) r.Fail({"safety", "H"}, "expected n columns");
    if (b.size() != H.rows()) r.Fail({"safety", "b"}, "expected one entry per row of H");
    cfg.safety = geometry::Polyhedron(H, b);
  }

  cfg.prior = ParsePrior(j["prior"], n, r);

  if (j.contains("nonlinear")) {
    const json& nl = j["nonlinear"];
    r.Keys(nl, {"nonlinear"}, {"gamma", "p", "d"});
    if (nl.contains("gamma")) cfg.gamma = r.Number(nl["gamma"], {"nonlinear", "gamma"});
    if (!(cfg.gamma >= 0.0) || std::isinf(cfg.gamma)) {
      r.Fail({"nonlinear", "gamma"}, "must be finite and >= 0");
    }
    if (nl.contains("p")) {
      const double p = r.Number(nl["p"], {"nonlinear", "p"});
      if (!(p >= 1.0)) r.Fail({"nonlinear", "p"}, "must be >= 1");
      cfg.p = std::isinf(p) ? conic::NormOrder::Infinity() : conic::NormOrder::FromDouble(p);
    }
    if (nl.contains("d")) cfg.d = r.Integer(nl["d"], {"nonlinear", "d"});
    if (cfg.d < 0) r.Fail({"nonlinear", "d"}, "must be >= 0");
  }

  const json& cost = j["cost"];
  if (cost.is_string()) {
    if (cost.get<std::string>() != "sphere") r.Fail({"cost"}, "expected a vector or \"sphere\"");
    cfg.sphere_cost = true;
  } else {
    cfg.c = r.Vector(cost, {"cost"});
    if (cfg.c.size() != n) r.Fail({"cost"}, "expected n entries");
    if (!cfg.c.allFinite()) r.Fail({"cost"}, "entries must be finite");
  }
  if (j.contains("epsilon")) cfg.epsilon = r.Number(j["epsilon"], {"epsilon"});
  if (!(cfg.epsilon > 0.0)) r.Fail({"epsilon"}, "must be positive");

  const json& system = j["system"];
  r.Keys(system, {"system"}, {"A_star", "g_star", "constants"});
  if (!system.contains("A_star")) r.Fail({"system"}, "needs A_star");
  cfg.A_star = r.Matrix(system["A_star"], {"system", "A_star"});
  if (cfg.A_star.rows() != n || cfg.A_star.cols() != n) {
    r.Fail({"system", "A_star"}, "expected an n x n matrix");
  }
  if (system.contains("constants")) {
    const json& k = system["constants"];
    if (!k.is_object()) r.Fail({"system", "constants"}, "expected an object");
    for (const auto& [name, value] : k.items()) {
      cfg.constants[name] = r.Number(value, {"system", "constants", name});
    }
  }
  if (system.contains("g_star")) {
    const json& g = system["g_star"];
    if (!g.is_array()) r.Fail({"system", "g_star"}, "expected an array of expressions");
    for (const json& e : g) cfg.g_star.push_back(r.String(e, {"system", "g_star"}));
    if (static_cast<int>(cfg.g_star.size()) != n) {
      r.Fail({"system", "g_star"}, "expected n expressions");
    }
    for (const std::string& text : cfg.g_star) {
      try {
        Expression::Parse(text, n, cfg.constants);
      } catch (const ExpressionError& e) {
        r.Fail({"system", "g_star"}, e.what(), "\"" + text + "\"");
      }
    }
  }

  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    r.Keys(s, {"seeds"}, {"explore", "test"});
    for (const char* key : {"explore", "test"}) {
      if (!s.contains(key)) continue;
      if (!s[key].is_number_unsigned()) r.Fail({"seeds", key}, "expected a nonnegative integer");
      (std::string(key) == "explore" ? cfg.explore_seed : cfg.test_seed) =
          s[key].get<std::uint64_t>();
    }
  }
  if (j.contains("steps")) cfg.steps = r.Integer(j["steps"], {"steps"});
  if (cfg.steps < 0) r.Fail({"steps"}, "must be >= 0");
  if (j.contains("max_trajectories")) {
    cfg.max_trajectories = r.Integer(j["max_trajectories"], {"max_trajectories"});
  }
  if (j.contains("offline")) cfg.offline = r.Bool(j["offline"], {"offline"});

  if (n < 2) cfg.dims = {0, 0};
  if (j.contains("snapshots")) {
    const json& s = j["snapshots"];
    r.Keys(s, {"snapshots"}, {"enabled", "directions", "dims"});
    if (s.contains("enabled")) cfg.snapshots = r.Bool(s["enabled"], {"snapshots", "enabled"});
    if (s.contains("directions")) {
      cfg.directions = r.Integer(s["directions"], {"snapshots", "directions"});
    }
    if (cfg.directions < 3) r.Fail({"snapshots", "directions"}, "must be >= 3");
    if (s.contains("dims")) {
      const json& dims = s["dims"];
      if (!dims.is_array() || dims.size() != 2 || !dims[0].is_number_integer() ||
          !dims[1].is_number_integer()) {
        r.Fail({"snapshots", "dims"}, "expected two coordinate numbers");
      }
      cfg.dims = {dims[0].get<int>() - 1, dims[1].get<int>() - 1};
    }
    if (cfg.dims.first < 0 || cfg.dims.second < 0 || cfg.dims.first >= n ||
        cfg.dims.second >= n || (n > 1 && cfg.dims.first == cfg.dims.second)) {
      r.Fail({"snapshots", "dims"}, "expected two distinct coordinates in 1..n");
    }
  }

  if (j.contains("validation")) {
    const json& v = j["validation"];
    r.Keys(v, {"validation"}, {"enabled", "samples"});
    if (v.contains("enabled")) cfg.validate_g = r.Bool(v["enabled"], {"validation", "enabled"});
    if (v.contains("samples")) {
      cfg.validation_samples = r.Integer(v["samples"], {"validation", "samples"});
    }
    if (cfg.validation_samples < 1) r.Fail({"validation", "samples"}, "must be positive");
  }
  if (j.contains("fit")) {
    const json& f = j["fit"];
    r.Keys(f, {"fit"}, {"train", "test"});
    if (f.contains("train")) cfg.fit_train = r.Integer(f["train"], {"fit", "train"});
    if (f.contains("test")) cfg.fit_test = r.Integer(f["test"], {"fit", "test"});
    if (cfg.fit_train < 1 || cfg.fit_test < 1) r.Fail({"fit"}, "counts must be positive");
  }
  cfg.feas_tol = cfg.gap_tol = DefaultTol(cfg.mode);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    r.Keys(s, {"solver"}, {"feas_tol", "gap_tol", "safety_tol"});
    if (s.contains("feas_tol")) cfg.feas_tol = r.Number(s["feas_tol"], {"solver", "feas_tol"});
    if (s.contains("gap_tol")) cfg.gap_tol = r.Number(s["gap_tol"], {"solver", "gap_tol"});
    if (s.contains("safety_tol")) {
      cfg.safety_tol = r.Number(s["safety_tol"], {"solver", "safety_tol"});
    }
    if (!(cfg.feas_tol > 0) || !(cfg.gap_tol > 0) || !(cfg.safety_tol >= 0)) {
      r.Fail({"solver"}, "tolerances must be positive");
    }
  }

  try {
    cfg.Validate();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    const size_t colon = what.find(':');
    r.Fail({what.substr(0, colon)}, what.substr(colon + 2));
  }
  return cfg;
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return name == o.name && mode == o.mode && n == o.n && safety == o.safety &&
         SamePrior(prior, o.prior) && gamma == o.gamma && p.infinite == o.p.infinite &&
         (p.infinite || (p.num == o.p.num && p.den == o.p.den)) && d == o.d &&
         Same(c, o.c) && sphere_cost == o.sphere_cost && epsilon == o.epsilon &&
         Same(A_star, o.A_star) && g_star == o.g_star && constants == o.constants &&
         explore_seed == o.explore_seed && test_seed == o.test_seed && steps == o.steps &&
         max_trajectories == o.max_trajectories && offline == o.offline &&
         directions == o.directions && dims == o.dims && snapshots == o.snapshots &&
         validate_g == o.validate_g && validation_samples == o.validation_samples &&
         fit_train == o.fit_train && fit_test == o.fit_test && feas_tol == o.feas_tol &&
         gap_tol == o.gap_tol && safety_tol == o.safety_tol;
}

conic::SolverSettings ExperimentConfig::Solver() const {
  conic::SolverSettings s;
  s.feas_tol = feas_tol > 0 ? feas_tol : DefaultTol(mode);
  s.gap_tol = gap_tol > 0 ? gap_tol : DefaultTol(mode);
  return s;
}

linear::MatrixPolytope ExperimentConfig::PolytopePrior() const {
  switch (prior.kind) {
    case PriorSpec::Kind::kBounded:
      return linear::MatrixPolytope::Bounded(n, prior.bound);
    case PriorSpec::Kind::kBox:
      return linear::MatrixPolytope::EntrywiseBox(prior.lower, prior.upper);
    case PriorSpec::Kind::kConstraints: {
      linear::MatrixPolytope U;
      U.n = n;
      U.constraints = prior.constraints;
      return U;
    }
    default:
      throw std::logic_error("prior is not a matrix polytope");
  }
}

linear::EllipsoidalUncertainty ExperimentConfig::EllipsoidPrior() const {
  if (prior.kind == PriorSpec::Kind::kFrobeniusBall) {
    return linear::EllipsoidalUncertainty::FrobeniusBall(prior.center, prior.radius);
  }
  if (prior.kind != PriorSpec::Kind::kEllipsoid) {
    throw std::logic_error("prior is not an ellipsoid");
  }
  linear::EllipsoidalUncertainty U;
  U.n = n;
  U.q = prior.form;
  return U;
}

nonlinear::NonlinearUncertainty ExperimentConfig::Nonlinear() const {
  nonlinear::NonlinearUncertainty U;
  U.A = PolytopePrior();
  U.gamma = gamma;
  U.p = p;
  U.d = d;
  return U;
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what, 0);
  };
  if (n < 1) fail("n", "must be positive");
  if (safety.dimension() != n) fail("safety", "dimension differs from n");
  if (mode == Mode::kLinear2) {
    if (prior.polytope()) fail("prior", "linear2 needs frobenius_ball or ellipsoid");
    try {
      EllipsoidPrior().Validate();
    } catch (const std::invalid_argument& e) {
      fail("prior", e.what());
    }
  } else if (!prior.polytope()) {
    fail("prior", ToString(mode) + " needs bounded, box or constraints");
  }
  if (sphere_cost && mode != Mode::kNonlinear1) fail("cost", "sphere sampling needs nonlinear1");
  if (!sphere_cost && c.size() != n) fail("cost", "expected n entries");
  if (A_star.rows() != n || A_star.cols() != n) fail("system", "A_star must be n x n");
  if (!g_star.empty() && mode != Mode::kNonlinear1) fail("system", "g_star needs nonlinear1");
  if (!g_star.empty() && static_cast<int>(g_star.size()) != n) {
    fail("system", "expected n expressions");
  }
  if (mode != Mode::kNonlinear1 && (gamma != 0.0 || d != 0)) {
    fail("nonlinear", "only used by nonlinear1");
  }
  if (mode == Mode::kNonlinear1 && d != 0 && !p.infinite && p.value() < 1.0) {
    fail("nonlinear", "p must be >= 1");
  }
}

ExperimentConfig ParseConfig(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    if (const size_t at = what.find("syntax error"); at != std::string::npos) {
      what = what.substr(at);
    }
    throw ConfigError(what, LineAt(text, byte));
  }
  return FromJson(j, Reader(text));
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path, 0);
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string SerializeConfig(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["mode"] = ToString(cfg.mode);
  j["n"] = cfg.n;
  j["safety"] = {{"H", MatrixJson(cfg.safety.H())}, {"b", VectorJson(cfg.safety.b())}};
  j["prior"] = PriorJson(cfg.prior);
  j["nonlinear"] = {{"gamma", cfg.gamma},
                    {"p", cfg.p.infinite ? NumberJson(kInf) : json(cfg.p.value())},
                    {"d", cfg.d}};
  j["cost"] = cfg.sphere_cost ? json("sphere") : VectorJson(cfg.c);
  j["epsilon"] = cfg.epsilon;
  json system = {{"A_star", MatrixJson(cfg.A_star)}};
  if (!cfg.g_star.empty()) system["g_star"] = cfg.g_star;
  if (!cfg.constants.empty()) {
    json k = json::object();
    for (const auto& [name, value] : cfg.constants) k[name] = NumberJson(value);
    system["constants"] = k;
  }
  j["system"] = system;
  j["seeds"] = {{"explore", cfg.explore_seed}, {"test", cfg.test_seed}};
  j["steps"] = cfg.steps;
  j["max_trajectories"] = cfg.max_trajectories;
  j["offline"] = cfg.offline;
  json snapshots = {{"enabled", cfg.snapshots}, {"directions", cfg.directions}};
  if (cfg.n >= 2) snapshots["dims"] = {cfg.dims.first + 1, cfg.dims.second + 1};
  j["snapshots"] = snapshots;
  j["validation"] = {{"enabled", cfg.validate_g}, {"samples", cfg.validation_samples}};
  j["fit"] = {{"train", cfg.fit_train}, {"test", cfg.fit_test}};
  const conic::SolverSettings s = cfg.Solver();
  j["solver"] = {{"feas_tol", s.feas_tol}, {"gap_tol", s.gap_tol}, {"safety_tol", cfg.safety_tol}};
  return j.dump(2) + "\n";
}

std::string ConfigDigest(const ExperimentConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : SerializeConfig(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace safelearn
