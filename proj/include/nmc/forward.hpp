#ifndef NMC_FORWARD_HPP
#define NMC_FORWARD_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nmc/geometry.hpp"
#include "nmc/types.hpp"

namespace nmc {

// Coefficients of the diffusion dX = b(X) dt + sigma(X) dW.  Bounded
// continuous b and sigma with sigma sigma^* uniformly elliptic; the bounds
// are declared here and spot-checked statistically by
// sample_coefficient_bounds.
struct DiffusionSpec {
  Index dim = 1;
  Index noise_dim = 1;

  // General coefficients; leave empty to use the constant forms below.
  std::function<void(const Vector&, Vector&)> drift;
  std::function<void(const Vector&, Matrix&)> diffusion;

  Vector drift_const;   // constant drift, empty => zero unless drift is set
  Matrix sigma_const;   // constant matrix, empty => sigma_scale * I
  double sigma_scale = 1.0;

  double drift_bound = 0.0;  // sup |b|
  double sigma_bound = 1.0;  // sup operator norm of sigma
  double ellipticity = 0.0;  // alpha0: sigma sigma^* >= alpha0 I

  static DiffusionSpec brownian(Index d, double scale = 1.0);
  static DiffusionSpec constant_drift(Vector b, double scale = 1.0);
  static DiffusionSpec constant_coefficients(Vector b, Matrix sigma);
  static DiffusionSpec general(Index d, Index r,
                               std::function<void(const Vector&, Vector&)> drift_fn,
                               std::function<void(const Vector&, Matrix&)> diffusion_fn,
                               double drift_bound, double sigma_bound,
                               double ellipticity);
};

struct CoefficientBounds {
  double max_drift_norm = 0.0;
  double max_sigma_norm = 0.0;
  double min_eigen_sigma2 = 0.0;  // smallest eigenvalue of sigma sigma^*
};

// Evaluates the declared bounds on uniform random points in [lo, hi]^d.
CoefficientBounds sample_coefficient_bounds(const DiffusionSpec& spec, const Vector& lo,
                                            const Vector& hi, Index samples,
                                            std::uint64_t seed);

// Uniform grid t = t0 < ... < t_N = T.
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  Index N = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double T_, Index N_) : t0(t0_), T(T_), N(N_) {
    if (!(T > t0) || N < 1 || !std::isfinite(t0) || !std::isfinite(T))
      throw InvalidInput("TimeGrid: requires finite t0 < T and N >= 1");
  }
  double dt() const { return (T - t0) / static_cast<double>(N); }
  double time(Index i) const {
    return t0 + (T - t0) * (static_cast<double>(i) / static_cast<double>(N));
  }
};

struct Scheme {
  enum class Kind { Reflected, Penalized, PenalizedExplicit };
  Kind kind = Kind::Reflected;
  double n = 0.0;  // penalization level for the penalized kinds

  static Scheme reflected() { return {Kind::Reflected, 0.0}; }
  static Scheme penalized(double n) {
    if (!(n > 0.0)) throw InvalidInput("Scheme::penalized: n must be > 0");
    return {Kind::Penalized, n};
  }
  static Scheme penalized_explicit(double n) {
    if (!(n > 0.0)) throw InvalidInput("Scheme::penalized_explicit: n must be > 0");
    return {Kind::PenalizedExplicit, n};
  }
  bool is_penalized() const { return kind != Kind::Reflected; }
};

// One discretized trajectory.  Row i of each matrix is the value at node i.
// The decomposition X + K = V holds at every node; k is the nondecreasing
// running total of <grad_level(X), dK>.
struct ForwardPath {
  TimeGrid grid;
  Scheme scheme;
  Matrix X;  // (N+1) x d
  Matrix K;  // (N+1) x d
  Vector k;  // (N+1)
  Matrix W;  // (N+1) x r
  Matrix V;  // (N+1) x d
};

struct PathEnsemble {
  TimeGrid grid;
  Scheme scheme;
  std::uint64_t seed = 0;
  std::vector<ForwardPath> paths;
};

// Brownian path on the grid: W_{t0} = 0, increments N(0, dt I), a pure
// function of (seed, path_index, step).
Matrix sample_brownian(const TimeGrid& grid, Index r, std::uint64_t seed,
                       std::uint64_t path_index);

// Semi-implicit Euler for the penalized SDE: the stiff n delta term is
// resolved exactly by resolvent_delta, so the scheme is stable for any
// n dt.  W is a Brownian path as produced by sample_brownian.
ForwardPath simulate_penalized(const DiffusionSpec& spec, const ConvexDomain& domain,
                               double n, const TimeGrid& grid, const Vector& x0,
                               const Matrix& W, bool explicit_scheme = false);

// Projection (Skorokhod) scheme for the reflected SDE; every node stays in
// the closure and dk > 0 only at steps whose pre-projection point left it.
ForwardPath simulate_reflected(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const TimeGrid& grid, const Vector& x0, const Matrix& W);

PathEnsemble simulate_ensemble(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid,
                               const Vector& x0, Index M, std::uint64_t seed,
                               int workers = 1);

// Per-path sup-node distances between the penalized and reflected schemes
// driven by the same Brownian increments.
struct CoupledDistances {
  Vector sup_X;  // per path: sup_i |X^n_i - X_i|
  Vector sup_K;  // per path: sup_i |K^n_i - K_i|
};
CoupledDistances couple_and_compare(const DiffusionSpec& spec, const ConvexDomain& domain,
                                    double n, const TimeGrid& grid, const Vector& x0,
                                    std::uint64_t seed, Index M, int workers = 1);

// Terminal slice of an ensemble without storing the trajectories.
struct TerminalSample {
  Matrix X;  // M x d
  Matrix K;  // M x d
  Vector k;  // M
};
TerminalSample simulate_terminal(const DiffusionSpec& spec, const ConvexDomain& domain,
                                 const Scheme& scheme, const TimeGrid& grid,
                                 const Vector& x0, Index M, std::uint64_t seed,
                                 int workers = 1);

// Per-path extremes used by the moment studies.
struct PathExtremes {
  Vector sup_X;  // sup_i |X_i|
  Vector sup_K;  // sup_i |K_i|
  Vector tv_K;   // sum_i |dK_i|
};
PathExtremes simulate_extremes(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid,
                               const Vector& x0, Index M, std::uint64_t seed,
                               int workers = 1);

// Compact ensemble for the backward solver: states at every node and the
// per-step boundary-measure increments, laid out time-major so the backward
// sweep reads contiguous columns.  X column block [i*d, (i+1)*d) is node i.
struct BsdePathData {
  TimeGrid grid;
  Scheme scheme;
  Index dim = 1;
  std::uint64_t seed = 0;
  Matrix X;   // M x (N+1)*d
  Matrix dk;  // M x N (empty when store_dk = false)

  Index paths() const { return X.rows(); }
  auto node(Index i) const { return X.middleCols(i * dim, dim); }  // M x d block
};
// The reflected scheme requires x0 in the closure; the penalized kinds
// accept any finite start.
BsdePathData simulate_for_bsde(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid,
                               const Vector& x0, Index M, std::uint64_t seed,
                               int workers = 1, bool store_dk = true);

// Deterministic penalized integrator: feeds a given free-term path V
// (rows = nodes) through the semi-implicit step, returning the constrained
// path and its reflection term.  Used for pathwise Skorokhod-type bounds.
struct PenalizedIntegral {
  Matrix X;         // (N+1) x d
  Matrix K;         // (N+1) x d
  double tv = 0.0;  // sum_i |dK_i|
};
PenalizedIntegral integrate_penalized_input(const ConvexDomain& domain, double n,
                                            const TimeGrid& grid, const Matrix& V);

// Columnar dump, one row per (path, node): path_id, step, time, x_0..,
// K_0.., k, w_0.. with 17 significant digits; a ".gz" suffix selects gzip.
void write_ensemble_csv(const PathEnsemble& ensemble, const std::string& path);

}  // namespace nmc

#endif  // NMC_FORWARD_HPP
