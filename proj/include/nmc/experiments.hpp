#ifndef NMC_EXPERIMENTS_HPP
#define NMC_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nmc/bsde.hpp"
#include "nmc/forward.hpp"
#include "nmc/geometry.hpp"
#include "nmc/oracle.hpp"
#include "nmc/types.hpp"

namespace nmc {

// One reported number.  Deterministic quantities carry std_error = 0.
struct EstimateCell {
  std::string id;
  double value = 0.0;
  double std_error = 0.0;
};

// Pass/fail against one declared criterion; detail cites the cell values
// the decision used.
struct Verdict {
  std::string id;
  bool pass = false;
  std::string detail;
};

// Everything a study reports.  The report is a pure function of
// (config, seed): wall_seconds is informational only and is excluded from
// both the CSV and the summary text.
struct StudyReport {
  std::string kind;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<EstimateCell> cells;
  std::vector<Verdict> verdicts;

  bool passed() const;
  const EstimateCell& cell(const std::string& id) const;
  // Text block: cells with errors, then verdicts with details.
  std::string summary() const;
  // Columns record,id,value,std_error; verdict rows carry pass as 0/1.
  void write_csv(const std::string& path) const;
};

// Kolmogorov-Smirnov distances; used as plain distances, not as tests.
double ks_one_sample(const Vector& sample, const std::function<double(double)>& cdf);
double ks_two_sample(const Vector& a, const Vector& b);

// Quantile by linear interpolation of order statistics, p in [0, 1].
double sample_quantile(const Vector& sample, double p);

// --- forward convergence -------------------------------------------------

struct ForwardStudyConfig {
  DiffusionSpec spec;
  ConvexDomain domain = ConvexDomain::interval(-1.0, 1.0);
  TimeGrid grid;
  Vector x0;
  std::vector<double> n_values{4.0, 16.0, 64.0, 256.0};
  Index M = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<std::string> criteria{"sup_x_decreasing", "sup_x_final_half",
                                    "sup_k_decreasing", "sup_k_final_half"};
};

// Couples the penalized and projection schemes on shared increments for
// each n and reports mean and quantiles of the sup-node distances.
// Decreasing means must separate by twice the combined standard error
// unless the distances vanish outright (degenerate configs pass trivially).
StudyReport study_forward_convergence(const ForwardStudyConfig& config);

// --- moment uniformity ---------------------------------------------------

struct MomentStudyConfig {
  DiffusionSpec spec;
  ConvexDomain domain = ConvexDomain::interval(-1.0, 1.0);
  TimeGrid grid;
  Vector x0;
  std::vector<double> n_values{16.0, 64.0, 256.0, 1024.0};
  std::vector<int> q_values{1, 2};
  Index M = 10000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<std::string> criteria{"uniform_sup_x", "uniform_sup_k", "uniform_tv_k"};
};

// Estimates E[sup|X|^2q], E[sup|K|^2q], E[|K|_TV^q] across the n sweep of
// the penalized scheme; each family must stay within a max/min ratio of 2
// over the levels n >= 16.
StudyReport study_moment_uniformity(const MomentStudyConfig& config);

// --- field convergence ---------------------------------------------------

struct FieldPoint {
  double t = 0.0;
  Vector x;
};

struct OracleSpec {
  enum class Kind { None, Analytic, FiniteDifference };
  Kind kind = Kind::None;
  // Analytic: the eigenmode field on (-1, 1) with unit diffusion.
  double lambda = 0.0;
  int mode = 1;
  // FiniteDifference: grid sizes for the boundary-condition solve and, when
  // penalized_side is set, for the whole-line sweep solves.
  Index J = 800;
  Index N_fd = 1600;
  Index J_pen = 800;
  Index N_pen = 2048;
  bool penalized_side = false;
};

struct FieldStudyConfig {
  DiffusionSpec spec;
  ConvexDomain domain = ConvexDomain::interval(-1.0, 1.0);
  NeumannProblem problem;
  BasisSpec basis;
  Stepping stepping = Stepping::picard(3);
  double T = 1.0;
  Index N = 100;
  Index M = 10000;
  std::vector<FieldPoint> points;
  std::vector<double> n_values{4.0, 16.0, 64.0, 256.0};
  OracleSpec oracle;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<std::string> criteria{"mc_gap_decreasing", "mc_gap_final_half",
                                    "oracle_agreement", "fd_gap_decreasing",
                                    "fd_gap_final"};
};

// Evaluates the field with the penalized scheme across the n sweep and with
// the projection scheme as the limit, at every point; when an oracle is
// configured it also checks |u - u_oracle| <= max(0.02, 3 stderr), and the
// penalized_side flag adds the deterministic whole-line sweep against the
// boundary-condition solve.
StudyReport study_field_convergence(const FieldStudyConfig& config);

// --- continuity in the initial data --------------------------------------

struct ContinuityStudyConfig {
  DiffusionSpec spec;
  ConvexDomain domain = ConvexDomain::interval(-1.0, 1.0);
  NeumannProblem problem;
  BasisSpec basis;
  Stepping stepping = Stepping::picard(3);
  double T = 1.0;
  Index N = 100;
  Index M = 10000;
  double t_base = 0.0;
  Vector x_base;
  int j_lo = 4;
  int j_hi = 6;
  OracleSpec oracle;  // Analytic supplies the expected field increments
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<std::string> criteria{"field_continuity", "ks_x_converges",
                                    "ks_k_converges"};
};

// Approaches (t_base, x_base) along t_j = t_base + 2^-j,
// x_j = x_base + 2^-j e_1: the field estimates must track the limit within
// the oracle increment (when available) plus three combined standard
// errors, and the per-coordinate Kolmogorov-Smirnov distances of the
// terminal (X, K) marginals must fall to the two-sample noise floor.
StudyReport study_initial_continuity(const ContinuityStudyConfig& config);

}  // namespace nmc

#endif  // NMC_EXPERIMENTS_HPP
