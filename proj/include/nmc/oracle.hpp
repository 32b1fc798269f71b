#ifndef NMC_ORACLE_HPP
#define NMC_ORACLE_HPP

#include <limits>
#include <string>
#include <vector>

#include "nmc/bsde.hpp"
#include "nmc/forward.hpp"
#include "nmc/geometry.hpp"
#include "nmc/types.hpp"

namespace nmc {

// Uniform space-time grid for the 1-D finite-difference solvers.  For the
// boundary-condition solve the spatial interval is the domain closure; for
// the penalized solve it must strictly contain it.
struct Pde1DGrid {
  double x_lo = -1.0;
  double x_hi = 1.0;
  Index J = 2;  // J+1 spatial nodes
  double t0 = 0.0;
  double T = 1.0;
  Index N_fd = 1;  // time steps

  Pde1DGrid() = default;
  Pde1DGrid(double x_lo_, double x_hi_, Index J_, double t0_, double T_, Index N_fd_);

  double dx() const { return (x_hi - x_lo) / static_cast<double>(J); }
  double dt() const { return (T - t0) / static_cast<double>(N_fd); }
  double node(Index j) const {
    return x_lo + (x_hi - x_lo) * (static_cast<double>(j) / static_cast<double>(J));
  }
  double time_level(Index l) const {
    return t0 + (T - t0) * (static_cast<double>(l) / static_cast<double>(N_fd));
  }
};

// u(t, x) on all grid levels; levels[l] is (J+1) x k_dim at time_level(l).
struct Fd1DField {
  Pde1DGrid grid;
  Index k_dim = 1;
  std::vector<Matrix> levels;
  // Sup over closure nodes at the earliest level of the change when the
  // truncation pad is doubled; NaN unless the solve was asked to check.
  double truncation_gap = std::numeric_limits<double>::quiet_NaN();

  // Bilinear interpolation; t and x are clamped to the grid.
  double value(double t, double x, Index component = 0) const;
};

// Exact field for f = -lambda y, h = 0, b = 0, sigma = 1 on (-1, 1) with
// terminal datum cos(mode pi (x+1)/2):
//   e^{-(lambda + mode^2 pi^2 / 8)(T - t)} cos(mode pi (x+1)/2).
// The terminal datum has zero derivative at both endpoints, so the field
// satisfies the homogeneous boundary condition for all t.
double analytic_linear_solution(double lambda, int mode, double t, double x, double T);

// Distribution function of Brownian motion (scale sigma, start x0) reflected
// into [lo, hi], at time T: cosine eigenseries of the half-Laplacian with
// zero-derivative ends.
double reflected_bm_cdf(double lo, double hi, double x0, double T, double y,
                        double sigma = 1.0);

// Backward implicit-explicit solve of
//   du/dt + a u_xx + b u_x + f(t, x, u) = 0,  u(T) = g,
//   du/dn + h(t, x, u) = 0 at both endpoints,
// with a = sigma^2 / 2 from the 1-D diffusion spec.  Diffusion and drift are
// implicit (tridiagonal, factored once); f and the ghost-node boundary terms
// are explicit with one Picard correction.  Throws SchemeFailure if values
// pass 1e6.
Fd1DField fd_solve_neumann(const NeumannProblem& problem, const DiffusionSpec& spec,
                           const Pde1DGrid& grid);

// Whole-line approximation on a padded grid: the boundary condition is
// replaced by the advection -n delta(x) u_x (implicit, upwinded toward the
// domain) and the source -<grad level, n delta> h(t, x, u) (explicit).  The
// truncation edges carry a homogeneous second-difference (linear
// extrapolation) condition.  check_truncation re-solves with the pad doubled
// at the same spacing and records the sup change over closure nodes in
// truncation_gap.
Fd1DField fd_solve_penalized(const NeumannProblem& problem, const DiffusionSpec& spec,
                             const ConvexDomain& domain, double n, const Pde1DGrid& grid,
                             bool check_truncation = false);

// Grid whose interval is the closure of the 1-D domain inflated by
// pad_widths domain-widths on each side.
Pde1DGrid padded_grid_for(const ConvexDomain& domain, Index J, double t0, double T,
                          Index N_fd, double pad_widths = 2.0);

// Columns t, x, component, value over all levels and nodes.
void write_field_csv(const Fd1DField& field, const std::string& path);

}  // namespace nmc

#endif  // NMC_ORACLE_HPP
