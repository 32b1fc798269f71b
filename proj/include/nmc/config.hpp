#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmc/types.hpp"

namespace nmc {

enum class Command {
  SimulateForward,
  SolveBsde,
  EvaluateField,
  StudyForwardConvergence,
  StudyFieldConvergence,
  StudyMomentUniformity,
  StudyInitialContinuity,
};

std::string command_name(Command c);
Command command_from_name(const std::string& name);

// Declarative run description.  Holds only names and numbers so that parse /
// serialize round-trips exactly; the runner materializes library objects.
struct DomainConfig {
  std::string kind = "ball";  // ball | ellipsoid | interval
  Vector center;              // ball, ellipsoid; resolved to a concrete vector
  double radius = 1.0;        // ball
  Vector semi_axes;           // ellipsoid
  double lo = -1.0;           // interval
  double hi = 1.0;
};

struct DiffusionConfig {
  std::string kind = "brownian";  // brownian | constant-drift | custom-table
  Index dim = 1;                  // brownian
  double sigma_scale = 1.0;       // brownian, constant-drift ("sigma" key)
  Vector drift;                   // constant-drift, custom-table
  Matrix sigma;                   // custom-table, d x r
};

struct ProblemConfig {
  std::string kind = "eigenfunction";  // eigenfunction | robin | constant | custom-polynomial
  double lambda = 0.0;                 // eigenfunction decay rate
  int mode = 1;                        // eigenfunction cosine mode
  double coupling = 1.0;               // robin
  Vector f0, h0, g0;                   // constant drivers, equal lengths
  Vector g_poly, f_poly, h_poly;       // polynomial coefficients, constant term first
  double f_y = 0.0, h_y = 0.0;         // linear value feedback of the polynomial drivers
};

struct GridConfig {
  double t0 = 0.0;
  double T = 1.0;
  Index N = 100;
};

struct EnsembleConfig {
  Index M = 1000;
  std::uint64_t seed = 1;
};

struct PointConfig {
  double t = 0.0;
  Vector x;
};

struct BasisConfig {
  int degree = 3;
  bool boundary_features = true;
};

struct SteppingConfig {
  std::string kind = "picard";  // explicit | picard
  int iterations = 3;
};

struct OracleConfig {
  std::string kind = "none";  // none | analytic | finite-difference
  double lambda = 0.0;
  int mode = 1;
  Index J = 800;
  Index N_fd = 1600;
  Index J_pen = 800;
  Index N_pen = 2048;
  bool penalized_side = false;
};

struct ContinuityConfig {
  double t_base = 0.0;
  Vector x_base;
  int j_lo = 4;
  int j_hi = 6;
};

struct RunConfig {
  Command command = Command::SimulateForward;
  bool command_explicit = false;  // parse metadata: the text named the command
  DomainConfig domain;
  DiffusionConfig diffusion;
  ProblemConfig problem;
  GridConfig grid;
  EnsembleConfig ensemble;
  std::string scheme = "reflected";  // reflected | penalized | penalized-explicit
  double n = 64.0;                   // penalization level for single-scheme runs
  Vector x0;
  std::vector<double> n_values;    // study sweep; empty = per-study default
  std::vector<int> q_values;       // moment powers, subset of {1, 2}
  std::vector<PointConfig> points; // field evaluation targets
  BasisConfig basis;
  SteppingConfig stepping;
  OracleConfig oracle;
  ContinuityConfig continuity;
  std::vector<std::string> criteria;  // empty = per-study default verdict set
  int workers = 0;                    // 0 = all available cores
  std::string out_dir;
};

// Structural equality on the canonical serialized form: fields that do not
// affect the run (e.g. oracle tuning while the oracle is disabled) are
// ignored.
bool operator==(const RunConfig& a, const RunConfig& b);
inline bool operator!=(const RunConfig& a, const RunConfig& b) { return !(a == b); }

// Carries every validation problem found in one pass, each prefixed with the
// path of the offending key.
class ConfigError : public InvalidInput {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

// Parses the JSON run description, filling documented defaults.  Throws
// ConfigError listing all unknown keys, missing required keys, and
// out-of-range values at once.
RunConfig parse_config(const std::string& text);

// Canonical JSON text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace nmc
