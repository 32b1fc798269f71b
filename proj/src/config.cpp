#include "nmc/config.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "json.hpp"

namespace nmc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr std::pair<Command, const char*> kCommandNames[] = {
    {Command::SimulateForward, "simulate-forward"},
    {Command::SolveBsde, "solve-bsde"},
    {Command::EvaluateField, "evaluate-field"},
    {Command::StudyForwardConvergence, "study-forward-convergence"},
    {Command::StudyFieldConvergence, "study-field-convergence"},
    {Command::StudyMomentUniformity, "study-moment-uniformity"},
    {Command::StudyInitialContinuity, "study-initial-continuity"},
};

std::string num_str(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

struct Collector {
  std::vector<std::string> errors;
  void add(const std::string& path, const std::string& msg) {
    errors.push_back(path.empty() ? msg : path + ": " + msg);
  }
};

std::string sub(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed, Collector& col) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) col.add(sub(path, it.key()), "unknown key");
  }
}

bool get_double(const json& j, const std::string& path, const char* key, double& out,
                Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    col.add(sub(path, key), "must be a finite number (got " + v.dump() + ")");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool get_positive(const json& j, const std::string& path, const char* key, double& out,
                  Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>()) || !(v.get<double>() > 0.0)) {
    col.add(sub(path, key), "must be a positive number (got " + v.dump() + ")");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool get_nonnegative(const json& j, const std::string& path, const char* key, double& out,
                     Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
    col.add(sub(path, key), "must be a nonnegative number (got " + v.dump() + ")");
    return false;
  }
  out = v.get<double>();
  return true;
}

// Counts accept any integral-valued number so 1e7 works in JSON text.
bool integral_in(const json& v, double lo, double hi, double& out) {
  if (!v.is_number()) return false;
  const double x = v.get<double>();
  if (!std::isfinite(x) || std::floor(x) != x || x < lo || x > hi) return false;
  out = x;
  return true;
}

bool get_count(const json& j, const std::string& path, const char* key, Index& out, double lo,
               double hi, Collector& col) {
  if (!j.contains(key)) return false;
  double x = 0.0;
  if (!integral_in(j.at(key), lo, hi, x)) {
    col.add(sub(path, key), "must be an integer in [" + num_str(lo) + ", " + num_str(hi) +
                                "] (got " + j.at(key).dump() + ")");
    return false;
  }
  out = static_cast<Index>(std::llround(x));
  return true;
}

bool get_int(const json& j, const std::string& path, const char* key, int& out, double lo,
             double hi, Collector& col) {
  Index v = 0;
  if (!get_count(j, path, key, v, lo, hi, col)) return false;
  out = static_cast<int>(v);
  return true;
}

bool get_seed(const json& j, const std::string& path, const char* key, std::uint64_t& out,
              Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return true;
  }
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    out = static_cast<std::uint64_t>(v.get<long long>());
    return true;
  }
  col.add(sub(path, key), "must be a nonnegative integer (got " + v.dump() + ")");
  return false;
}

bool get_bool(const json& j, const std::string& path, const char* key, bool& out, Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_boolean()) {
    col.add(sub(path, key), "must be true or false (got " + v.dump() + ")");
    return false;
  }
  out = v.get<bool>();
  return true;
}

bool get_string(const json& j, const std::string& path, const char* key, std::string& out,
                Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_string()) {
    col.add(sub(path, key), "must be a string (got " + v.dump() + ")");
    return false;
  }
  out = v.get<std::string>();
  return true;
}

bool get_vector(const json& j, const std::string& path, const char* key, Vector& out,
                Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_array()) {
    col.add(sub(path, key), "must be an array of numbers");
    return false;
  }
  Vector r(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
      col.add(sub(path, key) + "[" + std::to_string(i) + "]", "must be a finite number");
      return false;
    }
    r(static_cast<Index>(i)) = v[i].get<double>();
  }
  out = std::move(r);
  return true;
}

bool get_matrix(const json& j, const std::string& path, const char* key, Matrix& out,
                Collector& col) {
  if (!j.contains(key)) return false;
  const json& v = j.at(key);
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
    col.add(sub(path, key), "must be a nonempty array of equal-length number rows");
    return false;
  }
  const std::size_t cols = v[0].size();
  Matrix r(static_cast<Index>(v.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols) {
      col.add(sub(path, key) + "[" + std::to_string(i) + "]",
              "must be a row of " + std::to_string(cols) + " numbers");
      return false;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!v[i][c].is_number() || !std::isfinite(v[i][c].get<double>())) {
        col.add(sub(path, key) + "[" + std::to_string(i) + "]", "entries must be finite numbers");
        return false;
      }
      r(static_cast<Index>(i), static_cast<Index>(c)) = v[i][c].get<double>();
    }
  }
  out = std::move(r);
  return true;
}

void parse_domain(const json& j, Collector& col, DomainConfig& d) {
  std::string kind = d.kind;
  get_string(j, "domain", "kind", kind, col);
  if (kind == "ball") {
    check_keys(j, "domain", {"kind", "center", "radius", "dim"}, col);
    d.kind = kind;
    Index dim = 0;
    const bool has_dim = get_count(j, "domain", "dim", dim, 1, 1024, col);
    Vector center;
    if (get_vector(j, "domain", "center", center, col)) {
      if (center.size() == 0) {
        col.add("domain.center", "must be a nonempty array");
      } else {
        if (has_dim && dim != center.size())
          col.add("domain.dim", "inconsistent with the center length");
        d.center = std::move(center);
      }
    } else if (!j.contains("center")) {
      d.center = Vector::Zero(has_dim ? dim : 1);
    }
    get_positive(j, "domain", "radius", d.radius, col);
  } else if (kind == "ellipsoid") {
    check_keys(j, "domain", {"kind", "center", "semi_axes"}, col);
    d.kind = kind;
    if (!j.contains("semi_axes")) {
      col.add("domain.semi_axes", "missing required key");
    } else if (get_vector(j, "domain", "semi_axes", d.semi_axes, col)) {
      if (d.semi_axes.size() == 0 || (d.semi_axes.array() <= 0.0).any())
        col.add("domain.semi_axes", "entries must be positive");
    }
    Vector center;
    if (get_vector(j, "domain", "center", center, col)) {
      if (d.semi_axes.size() > 0 && center.size() != d.semi_axes.size())
        col.add("domain.center", "length differs from domain.semi_axes");
      else
        d.center = std::move(center);
    }
    if (d.center.size() == 0 && d.semi_axes.size() > 0) d.center = Vector::Zero(d.semi_axes.size());
  } else if (kind == "interval") {
    check_keys(j, "domain", {"kind", "lo", "hi"}, col);
    d.kind = kind;
    get_double(j, "domain", "lo", d.lo, col);
    get_double(j, "domain", "hi", d.hi, col);
    if (!(d.hi > d.lo)) col.add("domain.hi", "must exceed domain.lo");
  } else {
    col.add("domain.kind", "must be one of ball | ellipsoid | interval (got \"" + kind + "\")");
  }
}

void parse_diffusion(const json& j, Collector& col, DiffusionConfig& s) {
  std::string kind = s.kind;
  get_string(j, "diffusion", "kind", kind, col);
  if (kind == "brownian") {
    check_keys(j, "diffusion", {"kind", "dim", "sigma"}, col);
    s.kind = kind;
    get_count(j, "diffusion", "dim", s.dim, 1, 1024, col);
    get_nonnegative(j, "diffusion", "sigma", s.sigma_scale, col);
  } else if (kind == "constant-drift") {
    check_keys(j, "diffusion", {"kind", "drift", "sigma"}, col);
    s.kind = kind;
    if (!j.contains("drift"))
      col.add("diffusion.drift", "missing required key");
    else if (get_vector(j, "diffusion", "drift", s.drift, col) && s.drift.size() == 0)
      col.add("diffusion.drift", "must be a nonempty array");
    get_nonnegative(j, "diffusion", "sigma", s.sigma_scale, col);
  } else if (kind == "custom-table") {
    check_keys(j, "diffusion", {"kind", "drift", "sigma"}, col);
    s.kind = kind;
    if (!j.contains("drift"))
      col.add("diffusion.drift", "missing required key");
    else if (get_vector(j, "diffusion", "drift", s.drift, col) && s.drift.size() == 0)
      col.add("diffusion.drift", "must be a nonempty array");
    if (!j.contains("sigma"))
      col.add("diffusion.sigma", "missing required key");
    else if (get_matrix(j, "diffusion", "sigma", s.sigma, col) && s.drift.size() > 0 &&
             s.sigma.rows() != s.drift.size())
      col.add("diffusion.sigma", "must have one row per drift component");
  } else {
    col.add("diffusion.kind",
            "must be one of brownian | constant-drift | custom-table (got \"" + kind + "\")");
  }
}

void parse_problem(const json& j, Collector& col, ProblemConfig& p) {
  std::string kind = p.kind;
  get_string(j, "problem", "kind", kind, col);
  if (kind == "eigenfunction") {
    check_keys(j, "problem", {"kind", "lambda", "mode"}, col);
    p.kind = kind;
    get_double(j, "problem", "lambda", p.lambda, col);
    get_int(j, "problem", "mode", p.mode, 1, 64, col);
  } else if (kind == "robin") {
    check_keys(j, "problem", {"kind", "coupling"}, col);
    p.kind = kind;
    get_double(j, "problem", "coupling", p.coupling, col);
  } else if (kind == "constant") {
    check_keys(j, "problem", {"kind", "f0", "h0", "g0"}, col);
    p.kind = kind;
    get_vector(j, "problem", "f0", p.f0, col);
    get_vector(j, "problem", "h0", p.h0, col);
    get_vector(j, "problem", "g0", p.g0, col);
    Index k = 1;
    for (const Vector* v : {&p.f0, &p.h0, &p.g0})
      if (v->size() > 0) k = std::max(k, v->size());
    bool consistent = true;
    for (const Vector* v : {&p.f0, &p.h0, &p.g0})
      if (v->size() > 0 && v->size() != k) consistent = false;
    if (!consistent) {
      col.add("problem.f0", "f0, h0, g0 must have equal lengths");
    } else {
      if (p.f0.size() == 0) p.f0 = Vector::Zero(k);
      if (p.h0.size() == 0) p.h0 = Vector::Zero(k);
      if (p.g0.size() == 0) p.g0 = Vector::Ones(k);
    }
  } else if (kind == "custom-polynomial") {
    check_keys(j, "problem", {"kind", "g_poly", "f_poly", "f_y", "h_poly", "h_y"}, col);
    p.kind = kind;
    if (!j.contains("g_poly"))
      col.add("problem.g_poly", "missing required key");
    else if (get_vector(j, "problem", "g_poly", p.g_poly, col) && p.g_poly.size() == 0)
      col.add("problem.g_poly", "must be a nonempty array");
    get_vector(j, "problem", "f_poly", p.f_poly, col);
    get_vector(j, "problem", "h_poly", p.h_poly, col);
    if (p.f_poly.size() == 0) p.f_poly = Vector::Zero(1);
    if (p.h_poly.size() == 0) p.h_poly = Vector::Zero(1);
    get_double(j, "problem", "f_y", p.f_y, col);
    get_double(j, "problem", "h_y", p.h_y, col);
  } else {
    col.add("problem.kind",
            "must be one of eigenfunction | robin | constant | custom-polynomial (got \"" + kind +
                "\")");
  }
}

void parse_grid(const json& j, Collector& col, GridConfig& g) {
  check_keys(j, "grid", {"t", "t0", "T", "N"}, col);
  if (j.contains("t") && j.contains("t0")) col.add("grid.t", "duplicate of grid.t0");
  get_double(j, "grid", j.contains("t") ? "t" : "t0", g.t0, col);
  get_double(j, "grid", "T", g.T, col);
  get_count(j, "grid", "N", g.N, 1, 1e7, col);
  if (!(g.T > g.t0))
    col.add("grid.T", "must exceed grid.t0 (got T = " + num_str(g.T) + ", t0 = " + num_str(g.t0) +
                          ")");
}

void parse_ensemble(const json& j, Collector& col, EnsembleConfig& e) {
  check_keys(j, "ensemble", {"M", "seed"}, col);
  get_count(j, "ensemble", "M", e.M, 1, 1e7, col);
  get_seed(j, "ensemble", "seed", e.seed, col);
}

void parse_sweep(const json& j, Collector& col, RunConfig& c) {
  check_keys(j, "sweep", {"n", "q"}, col);
  if (j.contains("n")) {
    const json& v = j.at("n");
    if (!v.is_array() || v.empty()) {
      col.add("sweep.n", "must be a nonempty array of numbers");
    } else {
      std::vector<double> vals;
      bool ok = true;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>()) ||
            !(v[i].get<double>() > 0.0)) {
          col.add("sweep.n[" + std::to_string(i) + "]",
                  "must be a positive number (got " + v[i].dump() + ")");
          ok = false;
          break;
        }
        vals.push_back(v[i].get<double>());
      }
      for (std::size_t i = 1; ok && i < vals.size(); ++i)
        if (!(vals[i] > vals[i - 1])) {
          col.add("sweep.n", "must be strictly increasing");
          ok = false;
        }
      if (ok) c.n_values = std::move(vals);
    }
  }
  if (j.contains("q")) {
    const json& v = j.at("q");
    if (!v.is_array() || v.empty()) {
      col.add("sweep.q", "must be a nonempty array drawn from {1, 2}");
    } else {
      std::vector<int> vals;
      bool ok = true;
      for (std::size_t i = 0; i < v.size(); ++i) {
        double x = 0.0;
        if (!integral_in(v[i], 1, 2, x)) {
          col.add("sweep.q[" + std::to_string(i) + "]", "must be 1 or 2 (got " + v[i].dump() + ")");
          ok = false;
          break;
        }
        vals.push_back(static_cast<int>(x));
      }
      for (std::size_t i = 1; ok && i < vals.size(); ++i)
        if (vals[i] <= vals[i - 1]) {
          col.add("sweep.q", "must be strictly increasing");
          ok = false;
        }
      if (ok) c.q_values = std::move(vals);
    }
  }
}

void parse_points(const json& v, Collector& col, std::vector<PointConfig>& points) {
  if (!v.is_array()) {
    col.add("points", "must be an array of {t, x} objects");
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string path = "points[" + std::to_string(i) + "]";
    if (!v[i].is_object()) {
      col.add(path, "must be an object with keys t, x");
      continue;
    }
    check_keys(v[i], path, {"t", "x"}, col);
    PointConfig p;
    get_double(v[i], path, "t", p.t, col);
    if (!v[i].contains("x"))
      col.add(path + ".x", "missing required key");
    else if (get_vector(v[i], path, "x", p.x, col) && p.x.size() == 0)
      col.add(path + ".x", "must be a nonempty array");
    points.push_back(std::move(p));
  }
}

void parse_basis(const json& j, Collector& col, BasisConfig& b) {
  check_keys(j, "basis", {"degree", "boundary_features"}, col);
  get_int(j, "basis", "degree", b.degree, 1, 12, col);
  get_bool(j, "basis", "boundary_features", b.boundary_features, col);
}

void parse_stepping(const json& j, Collector& col, SteppingConfig& s) {
  check_keys(j, "stepping", {"kind", "iterations"}, col);
  std::string kind = s.kind;
  get_string(j, "stepping", "kind", kind, col);
  if (kind == "explicit" || kind == "picard")
    s.kind = kind;
  else
    col.add("stepping.kind", "must be explicit or picard (got \"" + kind + "\")");
  get_int(j, "stepping", "iterations", s.iterations, 1, 64, col);
}

void parse_oracle(const json& j, Collector& col, OracleConfig& o) {
  check_keys(j, "oracle", {"kind", "lambda", "mode", "J", "N", "J_pen", "N_pen", "penalized_side"},
             col);
  std::string kind = o.kind;
  get_string(j, "oracle", "kind", kind, col);
  if (kind == "none" || kind == "analytic" || kind == "finite-difference")
    o.kind = kind;
  else
    col.add("oracle.kind",
            "must be one of none | analytic | finite-difference (got \"" + kind + "\")");
  get_double(j, "oracle", "lambda", o.lambda, col);
  get_int(j, "oracle", "mode", o.mode, 1, 64, col);
  get_count(j, "oracle", "J", o.J, 2, 1e7, col);
  get_count(j, "oracle", "N", o.N_fd, 1, 1e7, col);
  get_count(j, "oracle", "J_pen", o.J_pen, 4, 1e7, col);
  get_count(j, "oracle", "N_pen", o.N_pen, 1, 1e7, col);
  get_bool(j, "oracle", "penalized_side", o.penalized_side, col);
}

void parse_continuity(const json& j, Collector& col, ContinuityConfig& c) {
  check_keys(j, "continuity", {"t_base", "x_base", "j_lo", "j_hi"}, col);
  get_double(j, "continuity", "t_base", c.t_base, col);
  if (get_vector(j, "continuity", "x_base", c.x_base, col) && c.x_base.size() == 0)
    col.add("continuity.x_base", "must be a nonempty array");
  get_int(j, "continuity", "j_lo", c.j_lo, 0, 40, col);
  get_int(j, "continuity", "j_hi", c.j_hi, 0, 60, col);
  if (c.j_hi < c.j_lo) col.add("continuity.j_hi", "must be >= continuity.j_lo");
}

Index domain_dim(const DomainConfig& d) {
  if (d.kind == "interval") return 1;
  if (d.kind == "ellipsoid") return d.semi_axes.size() > 0 ? d.semi_axes.size() : Index(0);
  return d.center.size() > 0 ? d.center.size() : Index(0);
}

Index diffusion_dim(const DiffusionConfig& s) {
  if (s.kind == "brownian") return s.dim;
  return s.drift.size();
}

Vector interior_point(const DomainConfig& d, Index dd) {
  if (d.kind == "interval") {
    Vector v(1);
    v << 0.5 * (d.lo + d.hi);
    return v;
  }
  if (d.center.size() > 0) return d.center;
  return Vector::Zero(dd > 0 ? dd : 1);
}

void cross_validate(const json& j, Collector& col, RunConfig& c) {
  const Index dd = domain_dim(c.domain);
  const Index sd = diffusion_dim(c.diffusion);
  if (dd > 0 && sd > 0 && dd != sd)
    col.add(c.diffusion.kind == "brownian" ? "diffusion.dim" : "diffusion.drift",
            "dimension " + std::to_string(sd) + " does not match the domain dimension " +
                std::to_string(dd));

  const Command cmd = c.command;
  const bool needs_x0 = cmd == Command::SimulateForward || cmd == Command::SolveBsde ||
                        cmd == Command::StudyForwardConvergence ||
                        cmd == Command::StudyMomentUniformity;
  if (needs_x0 && c.x0.size() == 0) c.x0 = interior_point(c.domain, dd);
  if (c.x0.size() > 0 && dd > 0 && c.x0.size() != dd)
    col.add("x0", "length " + std::to_string(c.x0.size()) + " does not match the domain dimension " +
                      std::to_string(dd));

  const bool needs_points = cmd == Command::EvaluateField || cmd == Command::StudyFieldConvergence;
  if (needs_points && c.points.empty())
    c.points.push_back({std::max(c.grid.t0, 0.0), interior_point(c.domain, dd)});
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const std::string path = "points[" + std::to_string(i) + "]";
    if (c.points[i].x.size() > 0 && dd > 0 && c.points[i].x.size() != dd)
      col.add(path + ".x", "length does not match the domain dimension " + std::to_string(dd));
    if (needs_points && !(c.points[i].t >= 0.0 && c.points[i].t <= c.grid.T))
      col.add(path + ".t", "must lie in [0, T] (got " + num_str(c.points[i].t) + ")");
  }

  if (cmd == Command::StudyInitialContinuity && c.continuity.x_base.size() == 0)
    c.continuity.x_base = interior_point(c.domain, dd);
  if (c.continuity.x_base.size() > 0 && dd > 0 && c.continuity.x_base.size() != dd)
    col.add("continuity.x_base",
            "length does not match the domain dimension " + std::to_string(dd));

  const bool needs_problem = cmd == Command::SolveBsde || cmd == Command::EvaluateField ||
                             cmd == Command::StudyFieldConvergence ||
                             cmd == Command::StudyInitialContinuity;
  if (needs_problem && !j.contains("problem")) col.add("problem", "missing required section");
  if (needs_problem && c.problem.kind == "eigenfunction" && dd != 1)
    col.add("problem.kind", "eigenfunction requires a one-dimensional domain");
  if ((cmd == Command::StudyFieldConvergence || cmd == Command::StudyInitialContinuity) &&
      c.oracle.kind != "none" && dd != 1)
    col.add("oracle.kind", "a " + c.oracle.kind + " oracle requires a one-dimensional domain");
}

ojson vec_json(const Vector& v) {
  ojson a = ojson::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ojson mat_json(const Matrix& m) {
  ojson a = ojson::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

}  // namespace

std::string command_name(Command c) {
  for (const auto& [cmd, name] : kCommandNames)
    if (cmd == c) return name;
  return "unknown";
}

Command command_from_name(const std::string& name) {
  for (const auto& [cmd, cname] : kCommandNames)
    if (name == cname) return cmd;
  throw InvalidInput("unknown command: " + name);
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : InvalidInput([&errors] {
        std::string m = "configuration invalid (" + std::to_string(errors.size()) + " error" +
                        (errors.size() == 1 ? "" : "s") + ")";
        for (const auto& e : errors) m += "\n  - " + e;
        return m;
      }()),
      errors_(std::move(errors)) {}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("config: not valid JSON — ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"config: top level must be an object"});

  Collector col;
  RunConfig c;
  check_keys(j, "",
             {"command", "domain", "diffusion", "problem", "grid", "ensemble", "scheme", "n", "x0",
              "sweep", "points", "basis", "stepping", "oracle", "continuity", "criteria", "workers",
              "out"},
             col);

  std::string cmd_name;
  if (get_string(j, "", "command", cmd_name, col)) {
    try {
      c.command = command_from_name(cmd_name);
      c.command_explicit = true;
    } catch (const InvalidInput&) {
      std::string names;
      for (const auto& [cmd, name] : kCommandNames) names += std::string(names.empty() ? "" : " | ") + name;
      col.add("command", "must be one of " + names + " (got \"" + cmd_name + "\")");
    }
  }

  const auto section = [&](const char* key, auto&& parser) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_object()) {
      col.add(key, "must be an object");
      return;
    }
    parser(j.at(key));
  };
  section("domain", [&](const json& s) { parse_domain(s, col, c.domain); });
  section("diffusion", [&](const json& s) { parse_diffusion(s, col, c.diffusion); });
  section("problem", [&](const json& s) { parse_problem(s, col, c.problem); });
  section("grid", [&](const json& s) { parse_grid(s, col, c.grid); });
  section("ensemble", [&](const json& s) { parse_ensemble(s, col, c.ensemble); });
  section("sweep", [&](const json& s) { parse_sweep(s, col, c); });
  section("basis", [&](const json& s) { parse_basis(s, col, c.basis); });
  section("stepping", [&](const json& s) { parse_stepping(s, col, c.stepping); });
  section("oracle", [&](const json& s) { parse_oracle(s, col, c.oracle); });
  section("continuity", [&](const json& s) { parse_continuity(s, col, c.continuity); });

  if (j.contains("points")) parse_points(j.at("points"), col, c.points);

  if (get_string(j, "", "scheme", c.scheme, col) && c.scheme != "reflected" &&
      c.scheme != "penalized" && c.scheme != "penalized-explicit")
    col.add("scheme",
            "must be one of reflected | penalized | penalized-explicit (got \"" + c.scheme + "\")");
  get_positive(j, "", "n", c.n, col);
  if (get_vector(j, "", "x0", c.x0, col) && c.x0.size() == 0)
    col.add("x0", "must be a nonempty array");
  if (j.contains("criteria")) {
    const json& v = j.at("criteria");
    if (!v.is_array()) {
      col.add("criteria", "must be an array of strings");
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string() || v[i].get<std::string>().empty()) {
          col.add("criteria[" + std::to_string(i) + "]", "must be a nonempty string");
          break;
        }
        c.criteria.push_back(v[i].get<std::string>());
      }
    }
  }
  get_int(j, "", "workers", c.workers, 0, 4096, col);
  get_string(j, "", "out", c.out_dir, col);

  cross_validate(j, col, c);

  if (!col.errors.empty()) throw ConfigError(std::move(col.errors));
  return c;
}

std::string serialize_config(const RunConfig& c) {
  ojson j;
  j["command"] = command_name(c.command);

  ojson d;
  d["kind"] = c.domain.kind;
  if (c.domain.kind == "interval") {
    d["lo"] = c.domain.lo;
    d["hi"] = c.domain.hi;
  } else if (c.domain.kind == "ellipsoid") {
    d["center"] = vec_json(c.domain.center);
    d["semi_axes"] = vec_json(c.domain.semi_axes);
  } else {
    d["center"] = vec_json(c.domain.center);
    d["radius"] = c.domain.radius;
  }
  j["domain"] = d;

  ojson s;
  s["kind"] = c.diffusion.kind;
  if (c.diffusion.kind == "brownian") {
    s["dim"] = c.diffusion.dim;
    s["sigma"] = c.diffusion.sigma_scale;
  } else if (c.diffusion.kind == "constant-drift") {
    s["drift"] = vec_json(c.diffusion.drift);
    s["sigma"] = c.diffusion.sigma_scale;
  } else {
    s["drift"] = vec_json(c.diffusion.drift);
    s["sigma"] = mat_json(c.diffusion.sigma);
  }
  j["diffusion"] = s;

  ojson p;
  p["kind"] = c.problem.kind;
  if (c.problem.kind == "eigenfunction") {
    p["lambda"] = c.problem.lambda;
    p["mode"] = c.problem.mode;
  } else if (c.problem.kind == "robin") {
    p["coupling"] = c.problem.coupling;
  } else if (c.problem.kind == "constant") {
    p["f0"] = vec_json(c.problem.f0);
    p["h0"] = vec_json(c.problem.h0);
    p["g0"] = vec_json(c.problem.g0);
  } else {
    p["g_poly"] = vec_json(c.problem.g_poly);
    p["f_poly"] = vec_json(c.problem.f_poly);
    p["f_y"] = c.problem.f_y;
    p["h_poly"] = vec_json(c.problem.h_poly);
    p["h_y"] = c.problem.h_y;
  }
  j["problem"] = p;

  j["grid"] = ojson{{"t0", c.grid.t0}, {"T", c.grid.T}, {"N", c.grid.N}};
  j["ensemble"] = ojson{{"M", c.ensemble.M}, {"seed", c.ensemble.seed}};
  j["scheme"] = c.scheme;
  j["n"] = c.n;
  if (c.x0.size() > 0) j["x0"] = vec_json(c.x0);
  if (!c.n_values.empty() || !c.q_values.empty()) {
    ojson sw;
    if (!c.n_values.empty()) sw["n"] = c.n_values;
    if (!c.q_values.empty()) sw["q"] = c.q_values;
    j["sweep"] = sw;
  }
  if (!c.points.empty()) {
    ojson pts = ojson::array();
    for (const auto& pt : c.points) pts.push_back(ojson{{"t", pt.t}, {"x", vec_json(pt.x)}});
    j["points"] = pts;
  }
  j["basis"] = ojson{{"degree", c.basis.degree}, {"boundary_features", c.basis.boundary_features}};
  ojson st;
  st["kind"] = c.stepping.kind;
  if (c.stepping.kind == "picard") st["iterations"] = c.stepping.iterations;
  j["stepping"] = st;
  if (c.oracle.kind == "analytic") {
    j["oracle"] = ojson{{"kind", "analytic"}, {"lambda", c.oracle.lambda}, {"mode", c.oracle.mode}};
  } else if (c.oracle.kind == "finite-difference") {
    j["oracle"] = ojson{{"kind", "finite-difference"}, {"J", c.oracle.J},   {"N", c.oracle.N_fd},
                        {"J_pen", c.oracle.J_pen},     {"N_pen", c.oracle.N_pen},
                        {"penalized_side", c.oracle.penalized_side}};
  }
  if (c.continuity.x_base.size() > 0)
    j["continuity"] = ojson{{"t_base", c.continuity.t_base},
                            {"x_base", vec_json(c.continuity.x_base)},
                            {"j_lo", c.continuity.j_lo},
                            {"j_hi", c.continuity.j_hi}};
  if (!c.criteria.empty()) j["criteria"] = c.criteria;
  j["workers"] = c.workers;
  if (!c.out_dir.empty()) j["out"] = c.out_dir;
  return j.dump(2) + "\n";
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace nmc
