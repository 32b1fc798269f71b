#ifndef NMC_BSDE_HPP
#define NMC_BSDE_HPP

#include <cstdint>
#include <functional>

#include "nmc/forward.hpp"
#include "nmc/geometry.hpp"
#include "nmc/types.hpp"

namespace nmc {

// Backward problem data: terminal condition g, interior driver f (paired
// with dt) and boundary driver h (paired with the boundary-measure
// increments dk).  Null f or h means the term is absent.  The declared
// structure constants are informational: monotonicity of f in y, Lipschitz
// constant of h in y, and the growth envelopes of the drivers and g.
struct NeumannProblem {
  Index k_dim = 1;
  std::function<void(double, const Vector&, const Vector&, Vector&)> f;  // (t, x, y) -> out
  std::function<void(double, const Vector&, const Vector&, Vector&)> h;  // (t, x, y) -> out
  std::function<void(const Vector&, Vector&)> g;                         // x -> out

  double monotonicity_alpha = 0.0;
  double lipschitz_beta = 0.0;
  double growth_c1 = 0.0;
  double growth_c2 = 1.0;
  double growth_exponent = 1.0;
};

// dY = -lambda Y dt with terminal cos(mode pi (x - lo) / (hi - lo)): the
// terminal function has zero normal derivative at both ends, so the exact
// field is a pure eigenmode with an explicit decay rate (see
// analytic_linear_solution).
NeumannProblem eigenfunction_problem(double lambda, int mode, double lo, double hi);

// f = 0, h(y) = coupling * y, g = 1: a linear boundary-coupled field.
NeumannProblem robin_problem(double coupling);

// Constant drivers; empty h0 means no boundary driver.
NeumannProblem constant_driver_problem(Vector f0, Vector h0, Vector g0);

// Scalar 1-D problem with polynomial data: f = f_poly(x) + f_y * y,
// h = h_poly(x) + h_y * y, g = g_poly(x); empty h_poly with h_y = 0 means
// no boundary driver.
NeumannProblem polynomial_problem(Vector g_poly, Vector f_poly, double f_y, Vector h_poly,
                                  double h_y);

struct BasisSpec {
  int degree = 3;                 // total-degree monomial cap
  bool boundary_features = true;  // append dist(x, boundary) and max(0, -level)
};

struct Stepping {
  enum class Kind { Explicit, Picard };
  Kind kind = Kind::Explicit;
  int iterations = 3;

  static Stepping explicit_step() { return {Kind::Explicit, 0}; }
  static Stepping picard(int iters) {
    if (iters < 1) throw InvalidInput("Stepping::picard: iterations must be >= 1");
    return {Kind::Picard, iters};
  }
};

// Monomials up to the total-degree cap plus optional boundary descriptors.
// Row layout: [1, monomials..., dist, relu(-level)].
class RegressionBasis {
 public:
  RegressionBasis(const ConvexDomain& domain, const BasisSpec& spec);
  Index size() const { return size_; }
  Index dim() const { return domain_->dim(); }
  void eval(const Eigen::Ref<const Vector>& x, Eigen::Ref<Eigen::RowVectorXd> row) const;

 private:
  const ConvexDomain* domain_;
  BasisSpec spec_;
  std::vector<std::vector<int>> exponents_;
  Index size_ = 0;
};

// Least-squares conditional expectation of each response column given the
// state: ridge-stabilized on centered and scaled features with an
// unpenalized intercept, so constant responses are reproduced exactly and
// a degenerate state cloud degrades to the plain sample mean.
struct RegressionFit {
  Matrix fitted;           // M x k
  Index live = 0;          // feature columns with nonzero spread
  double ortho = 0.0;      // max_j |phi_j . residual| / M over raw basis columns
};
RegressionFit regress_conditional(const RegressionBasis& basis,
                                  const Eigen::Ref<const Matrix>& states,
                                  const Eigen::Ref<const Matrix>& values, Index step,
                                  int workers = 1);

struct BsdeSolution {
  TimeGrid grid;
  Scheme scheme;
  Index k_dim = 1;
  Matrix Y;                    // M x (N+1)*k, time-major: column block i*k is node i
  Matrix dM;                   // M x N*k martingale increments
  Vector step_orthogonality;   // per step: worst raw-basis residual inner product / M
  Index basis_size = 0;

  auto node(Index i) const { return Y.middleCols(i * k_dim, k_dim); }
};

// Backward least-squares sweep over a stored ensemble.  Explicit stepping
// evaluates the drivers at the regressed conditional expectation; Picard
// refines Y_i = C_i + f(t_i, X_i, Y_i) dt - h(t_i, X_i, Y_i) dk_i.
BsdeSolution solve_bsde(const BsdePathData& paths, const ConvexDomain& domain,
                        const NeumannProblem& problem, const BasisSpec& basis,
                        const Stepping& stepping, int workers = 1);

// Monte Carlo field value at a single space-time point.  value is the mean
// of Y at the initial node; the standard error comes from the per-path
// totals g(X_T) + sum(f dt - h dk), whose mean coincides with the estimator
// because regression residuals average to zero at every step.
struct FieldEstimate {
  double t = 0.0;
  Vector x;
  Scheme scheme;
  Vector value;      // k
  Vector std_error;  // k
  Index M = 0;
  Index N = 0;
  std::uint64_t seed = 0;
};
// The reflected scheme requires x in the closure; the penalized kinds
// accept any finite start.  t = T returns g(x) with zero error.
FieldEstimate evaluate_field(const DiffusionSpec& spec, const ConvexDomain& domain,
                             const NeumannProblem& problem, const BasisSpec& basis,
                             const Stepping& stepping, double t, const Vector& x, double T,
                             const Scheme& scheme, Index N, Index M, std::uint64_t seed,
                             int workers = 1);

// Post-hoc diagnostics of the martingale part: per-step orthogonality of
// the increments to the raw basis, and the mean total increment per
// component (should vanish to statistical precision).
struct MartingaleReport {
  Vector step_orthogonality;  // N
  Vector total_mean;          // k
  Vector total_std_error;     // k
  double max_orthogonality = 0.0;
};
MartingaleReport martingale_residual_report(const BsdeSolution& solution,
                                            const BsdePathData& paths,
                                            const ConvexDomain& domain,
                                            const BasisSpec& basis);

// Columnar dump, one row per (path, node): path_id, step, y_0.., dm_0..;
// the martingale increment cells are empty on the terminal row.
void write_solution_csv(const BsdeSolution& solution, const std::string& path);

// One row per estimate: t, x_0.., n_or_reflected, value_0.., stderr_0..,
// M, N, seed.  All estimates must share the state and value dimensions.
void write_field_estimates_csv(const std::vector<FieldEstimate>& estimates,
                               const std::string& path);

}  // namespace nmc

#endif  // NMC_BSDE_HPP
