#include "nmc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmc/csv.hpp"

namespace nmc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBlowUp = 1e6;

// Thomas algorithm with the factorization kept so one matrix serves every
// time level and component.  low(0) and up(n-1) are ignored.
struct Thomas {
  Vector low, piv, cp;

  void factor(const Vector& low_in, const Vector& diag, const Vector& up) {
    const Index n = diag.size();
    low = low_in;
    piv.resize(n);
    cp.resize(n);
    piv(0) = diag(0);
    if (std::abs(piv(0)) < 1e-300) throw SchemeFailure("tridiagonal pivot vanished");
    cp(0) = up(0) / piv(0);
    for (Index j = 1; j < n; ++j) {
      piv(j) = diag(j) - low(j) * cp(j - 1);
      if (std::abs(piv(j)) < 1e-300) throw SchemeFailure("tridiagonal pivot vanished");
      cp(j) = up(j) / piv(j);
    }
  }

  void solve(Eigen::Ref<Vector> x) const {
    const Index n = piv.size();
    x(0) /= piv(0);
    for (Index j = 1; j < n; ++j) x(j) = (x(j) - low(j) * x(j - 1)) / piv(j);
    for (Index j = n - 2; j >= 0; --j) x(j) -= cp(j) * x(j + 1);
  }
};

// Scalar drift and half-squared-diffusion a = sigma^2 / 2 on the grid nodes.
void scalar_coefficients(const DiffusionSpec& spec, const Pde1DGrid& grid, Vector& a,
                         Vector& b) {
  if (spec.dim != 1) throw InvalidInput("finite-difference oracle requires dim == 1");
  const Index J = grid.J;
  a.resize(J + 1);
  b.resize(J + 1);
  Vector x(1), bv(1);
  Matrix sig(1, spec.noise_dim);
  for (Index j = 0; j <= J; ++j) {
    x(0) = grid.node(j);
    if (spec.drift) {
      spec.drift(x, bv);
      b(j) = bv(0);
    } else if (spec.drift_const.size() > 0) {
      b(j) = spec.drift_const(0);
    } else {
      b(j) = 0.0;
    }
    if (spec.diffusion) {
      spec.diffusion(x, sig);
      a(j) = 0.5 * sig.row(0).squaredNorm();
    } else if (spec.sigma_const.size() > 0) {
      a(j) = 0.5 * spec.sigma_const.row(0).squaredNorm();
    } else {
      a(j) = 0.5 * spec.sigma_scale * spec.sigma_scale;
    }
    if (!(a(j) > 1e-14))
      throw InvalidInput("finite-difference oracle requires nondegenerate diffusion");
  }
  if (!a.allFinite() || !b.allFinite())
    throw InvalidInput("coefficients non-finite on the grid");
}

void check_problem(const NeumannProblem& problem) {
  if (!problem.g) throw InvalidInput("problem needs a terminal function g");
  if (problem.k_dim < 1) throw InvalidInput("problem needs k_dim >= 1");
}

void check_level(const Matrix& u, Index level) {
  if (!u.allFinite() || u.cwiseAbs().maxCoeff() > kBlowUp)
    throw SchemeFailure("finite-difference solve blew up at time level " +
                        std::to_string(level) + "; refine the grid");
}

}  // namespace

Pde1DGrid::Pde1DGrid(double x_lo_, double x_hi_, Index J_, double t0_, double T_,
                     Index N_fd_)
    : x_lo(x_lo_), x_hi(x_hi_), J(J_), t0(t0_), T(T_), N_fd(N_fd_) {
  if (!std::isfinite(x_lo) || !std::isfinite(x_hi) || !std::isfinite(t0) ||
      !std::isfinite(T) || !(x_lo < x_hi) || !(t0 < T) || J < 2 || N_fd < 1)
    throw InvalidInput("Pde1DGrid: requires x_lo < x_hi, t0 < T, J >= 2, N_fd >= 1");
}

double Fd1DField::value(double t, double x, Index component) const {
  if (!std::isfinite(t) || !std::isfinite(x)) throw InvalidInput("value: non-finite point");
  if (component < 0 || component >= k_dim) throw InvalidInput("value: component out of range");
  if (levels.size() != static_cast<size_t>(grid.N_fd + 1))
    throw InvalidInput("value: field has no levels");
  const double st = std::clamp((t - grid.t0) / (grid.T - grid.t0), 0.0, 1.0) *
                    static_cast<double>(grid.N_fd);
  const double sx = std::clamp((x - grid.x_lo) / (grid.x_hi - grid.x_lo), 0.0, 1.0) *
                    static_cast<double>(grid.J);
  const Index l = std::min(static_cast<Index>(st), grid.N_fd - 1);
  const Index j = std::min(static_cast<Index>(sx), grid.J - 1);
  const double wt = st - static_cast<double>(l);
  const double wx = sx - static_cast<double>(j);
  const Matrix& lo = levels[static_cast<size_t>(l)];
  const Matrix& hi = levels[static_cast<size_t>(l) + 1];
  const double v0 = (1.0 - wx) * lo(j, component) + wx * lo(j + 1, component);
  const double v1 = (1.0 - wx) * hi(j, component) + wx * hi(j + 1, component);
  return (1.0 - wt) * v0 + wt * v1;
}

double analytic_linear_solution(double lambda, int mode, double t, double x, double T) {
  if (mode < 1) throw InvalidInput("analytic_linear_solution: mode must be >= 1");
  if (!std::isfinite(lambda) || !std::isfinite(t) || !std::isfinite(x) || !std::isfinite(T) ||
      t > T)
    throw InvalidInput("analytic_linear_solution: requires finite arguments with t <= T");
  if (std::abs(x) > 1.0 + 1e-9)
    throw InvalidInput("analytic_linear_solution: x outside [-1, 1]");
  const double xc = std::clamp(x, -1.0, 1.0);
  const double m = static_cast<double>(mode);
  const double rate = lambda + m * m * kPi * kPi / 8.0;
  return std::exp(-rate * (T - t)) * std::cos(m * kPi * (xc + 1.0) / 2.0);
}

double reflected_bm_cdf(double lo, double hi, double x0, double T, double y, double sigma) {
  if (!(lo < hi) || !(T > 0.0) || !(sigma > 0.0) || !std::isfinite(x0) || !std::isfinite(y))
    throw InvalidInput("reflected_bm_cdf: requires lo < hi, T > 0, sigma > 0");
  if (x0 < lo - 1e-12 || x0 > hi + 1e-12)
    throw InvalidInput("reflected_bm_cdf: start outside the interval");
  if (y <= lo) return 0.0;
  if (y >= hi) return 1.0;
  const double L = hi - lo;
  const double z0 = std::clamp(x0, lo, hi) - lo;
  double F = (y - lo) / L;
  for (int m = 1; m <= 100000; ++m) {
    const double km = static_cast<double>(m) * kPi / L;
    const double damp = std::exp(-0.5 * sigma * sigma * km * km * T);
    if (damp < 1e-18) break;
    F += damp * (2.0 / (static_cast<double>(m) * kPi)) * std::cos(km * z0) *
         std::sin(km * (y - lo));
  }
  return std::clamp(F, 0.0, 1.0);
}

Fd1DField fd_solve_neumann(const NeumannProblem& problem, const DiffusionSpec& spec,
                           const Pde1DGrid& grid) {
  check_problem(problem);
  const Index J = grid.J, N = grid.N_fd, k = problem.k_dim;
  const double dx = grid.dx(), dt = grid.dt();

  Vector a, b;
  scalar_coefficients(spec, grid, a, b);

  // (I - dt A) with central interior differences and second-order ghost
  // elimination of du/dn + h = 0 at both ends; the h part lands on the rhs.
  Vector low(J + 1), diag(J + 1), up(J + 1);
  low(0) = 0.0;
  up(J) = 0.0;
  for (Index j = 1; j < J; ++j) {
    const double alpha = dt * a(j) / (dx * dx);
    const double beta = dt * b(j) / (2.0 * dx);
    low(j) = -alpha + beta;
    diag(j) = 1.0 + 2.0 * alpha;
    up(j) = -alpha - beta;
  }
  const double alpha0 = dt * a(0) / (dx * dx), alphaJ = dt * a(J) / (dx * dx);
  diag(0) = 1.0 + 2.0 * alpha0;
  up(0) = -2.0 * alpha0;
  diag(J) = 1.0 + 2.0 * alphaJ;
  low(J) = -2.0 * alphaJ;
  Thomas solver;
  solver.factor(low, diag, up);

  Fd1DField field;
  field.grid = grid;
  field.k_dim = k;
  field.levels.assign(static_cast<size_t>(N + 1), Matrix(J + 1, k));

  Vector xbuf(1), ybuf(k), fout(k), hout(k);
  Matrix& terminal = field.levels[static_cast<size_t>(N)];
  for (Index j = 0; j <= J; ++j) {
    xbuf(0) = grid.node(j);
    problem.g(xbuf, fout);
    if (fout.size() != k) throw InvalidInput("terminal function returned wrong size");
    terminal.row(j) = fout.transpose();
  }
  check_level(terminal, N);

  Matrix rhs(J + 1, k), ustar(J + 1, k);
  auto build_rhs = [&](double t, const Matrix& prev, const Matrix& ybar, Matrix& out) {
    out = prev;
    if (problem.f) {
      for (Index j = 0; j <= J; ++j) {
        xbuf(0) = grid.node(j);
        ybuf = ybar.row(j).transpose();
        problem.f(t, xbuf, ybuf, fout);
        out.row(j) += dt * fout.transpose();
      }
    }
    if (problem.h) {
      xbuf(0) = grid.node(0);
      ybuf = ybar.row(0).transpose();
      problem.h(t, xbuf, ybuf, hout);
      out.row(0) += dt * (-2.0 * a(0) / dx + b(0)) * hout.transpose();
      xbuf(0) = grid.node(J);
      ybuf = ybar.row(J).transpose();
      problem.h(t, xbuf, ybuf, hout);
      out.row(J) += dt * (-2.0 * a(J) / dx - b(J)) * hout.transpose();
    }
  };

  for (Index l = N - 1; l >= 0; --l) {
    const double tl = grid.time_level(l);
    const Matrix& prev = field.levels[static_cast<size_t>(l) + 1];
    build_rhs(tl, prev, prev, rhs);
    ustar = rhs;
    for (Index c = 0; c < k; ++c) solver.solve(ustar.col(c));
    build_rhs(tl, prev, ustar, rhs);
    Matrix& cur = field.levels[static_cast<size_t>(l)];
    cur = rhs;
    for (Index c = 0; c < k; ++c) solver.solve(cur.col(c));
    check_level(cur, l);
  }
  return field;
}

namespace {

Fd1DField solve_penalized_on_grid(const NeumannProblem& problem, const DiffusionSpec& spec,
                                  const ConvexDomain& domain, double n,
                                  const Pde1DGrid& grid) {
  const Index J = grid.J, N = grid.N_fd, k = problem.k_dim;
  const double dx = grid.dx(), dt = grid.dt();
  if (J < 4) throw InvalidInput("penalized solve needs J >= 4");

  Vector a, b;
  scalar_coefficients(spec, grid, a, b);

  // Total advection c = b - n delta, upwinded; absorption weight
  // w = <grad level, n delta> multiplies the boundary driver as a source.
  Vector w(J + 1), c(J + 1);
  {
    Vector xbuf(1), dlt(1), grd(1);
    for (Index j = 0; j <= J; ++j) {
      xbuf(0) = grid.node(j);
      penalization_delta(domain, xbuf, dlt);
      domain.grad_level(xbuf, grd);
      c(j) = b(j) - n * dlt(0);
      w(j) = n * dlt(0) * grd(0);
    }
  }

  // Central differences where the cell Peclet number allows (second order
  // across the penalization layer), one-sided toward the domain where
  // advection dominates; both keep the matrix an M-matrix.
  Vector low(J + 1), diag(J + 1), up(J + 1);
  for (Index j = 1; j < J; ++j) {
    const double alpha = dt * a(j) / (dx * dx);
    if (std::abs(c(j)) * dx <= 2.0 * a(j)) {
      const double beta = dt * c(j) / (2.0 * dx);
      low(j) = -alpha + beta;
      diag(j) = 1.0 + 2.0 * alpha;
      up(j) = -alpha - beta;
    } else {
      const double gamma = dt * std::abs(c(j)) / dx;
      low(j) = -alpha - (c(j) < 0.0 ? gamma : 0.0);
      diag(j) = 1.0 + 2.0 * alpha + gamma;
      up(j) = -alpha - (c(j) >= 0.0 ? gamma : 0.0);
    }
  }
  // Truncation edges carry u_xx = 0, i.e. u_0 = 2 u_1 - u_2 and the mirror
  // at J; fold those into rows 1 and J-1 and solve for the interior only.
  Vector elow(J - 1), ediag(J - 1), eup(J - 1);
  for (Index j = 1; j < J; ++j) {
    elow(j - 1) = low(j);
    ediag(j - 1) = diag(j);
    eup(j - 1) = up(j);
  }
  ediag(0) = diag(1) + 2.0 * low(1);
  eup(0) = up(1) - low(1);
  elow(0) = 0.0;
  ediag(J - 2) = diag(J - 1) + 2.0 * up(J - 1);
  elow(J - 2) = low(J - 1) - up(J - 1);
  eup(J - 2) = 0.0;
  Thomas solver;
  solver.factor(elow, ediag, eup);

  Fd1DField field;
  field.grid = grid;
  field.k_dim = k;
  field.levels.assign(static_cast<size_t>(N + 1), Matrix(J + 1, k));

  Vector xbuf(1), ybuf(k), fout(k), hout(k);
  Matrix& terminal = field.levels[static_cast<size_t>(N)];
  for (Index j = 0; j <= J; ++j) {
    xbuf(0) = grid.node(j);
    problem.g(xbuf, fout);
    if (fout.size() != k) throw InvalidInput("terminal function returned wrong size");
    terminal.row(j) = fout.transpose();
  }
  check_level(terminal, N);

  Matrix rhs(J - 1, k), ustar(J + 1, k);
  auto build_rhs = [&](double t, const Matrix& prev, const Matrix& ybar, Matrix& out) {
    for (Index j = 1; j < J; ++j) {
      out.row(j - 1) = prev.row(j);
      xbuf(0) = grid.node(j);
      if (problem.f) {
        ybuf = ybar.row(j).transpose();
        problem.f(t, xbuf, ybuf, fout);
        out.row(j - 1) += dt * fout.transpose();
      }
      if (problem.h && w(j) != 0.0) {
        ybuf = ybar.row(j).transpose();
        problem.h(t, xbuf, ybuf, hout);
        out.row(j - 1) -= dt * w(j) * hout.transpose();
      }
    }
  };
  auto extrapolate_ends = [&](Matrix& u) {
    u.row(0) = 2.0 * u.row(1) - u.row(2);
    u.row(J) = 2.0 * u.row(J - 1) - u.row(J - 2);
  };

  for (Index l = N - 1; l >= 0; --l) {
    const double tl = grid.time_level(l);
    const Matrix& prev = field.levels[static_cast<size_t>(l) + 1];
    build_rhs(tl, prev, prev, rhs);
    for (Index c2 = 0; c2 < k; ++c2) solver.solve(rhs.col(c2));
    ustar.middleRows(1, J - 1) = rhs;
    extrapolate_ends(ustar);
    build_rhs(tl, prev, ustar, rhs);
    for (Index c2 = 0; c2 < k; ++c2) solver.solve(rhs.col(c2));
    Matrix& cur = field.levels[static_cast<size_t>(l)];
    cur.middleRows(1, J - 1) = rhs;
    extrapolate_ends(cur);
    check_level(cur, l);
  }
  return field;
}

}  // namespace

Fd1DField fd_solve_penalized(const NeumannProblem& problem, const DiffusionSpec& spec,
                             const ConvexDomain& domain, double n, const Pde1DGrid& grid,
                             bool check_truncation) {
  check_problem(problem);
  if (domain.dim() != 1) throw InvalidInput("penalized oracle requires a 1-D domain");
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("penalization level must be > 0");
  const auto box = domain.bounding_box(0.0);
  const double lo_G = box.first(0), hi_G = box.second(0);
  if (!(grid.x_lo < lo_G) || !(grid.x_hi > hi_G))
    throw InvalidInput("penalized grid must strictly contain the domain closure");

  Fd1DField field = solve_penalized_on_grid(problem, spec, domain, n, grid);

  if (check_truncation) {
    const double dx = grid.dx();
    const Index extra_l = std::max<Index>(1, static_cast<Index>(std::llround((lo_G - grid.x_lo) / dx)));
    const Index extra_r = std::max<Index>(1, static_cast<Index>(std::llround((grid.x_hi - hi_G) / dx)));
    Pde1DGrid wide(grid.x_lo - static_cast<double>(extra_l) * dx,
                   grid.x_hi + static_cast<double>(extra_r) * dx, grid.J + extra_l + extra_r,
                   grid.t0, grid.T, grid.N_fd);
    Fd1DField ref = solve_penalized_on_grid(problem, spec, domain, n, wide);
    double gap = 0.0;
    for (Index j = 0; j <= grid.J; ++j) {
      const double x = grid.node(j);
      if (x < lo_G || x > hi_G) continue;
      for (Index c = 0; c < field.k_dim; ++c)
        gap = std::max(gap, std::abs(field.levels[0](j, c) - ref.value(grid.t0, x, c)));
    }
    field.truncation_gap = gap;
  }
  return field;
}

Pde1DGrid padded_grid_for(const ConvexDomain& domain, Index J, double t0, double T,
                          Index N_fd, double pad_widths) {
  if (domain.dim() != 1) throw InvalidInput("padded_grid_for requires a 1-D domain");
  if (!(pad_widths > 0.0)) throw InvalidInput("padded_grid_for: pad must be > 0");
  const auto box = domain.bounding_box(0.0);
  const double lo = box.first(0), hi = box.second(0);
  const double pad = pad_widths * (hi - lo);
  return Pde1DGrid(lo - pad, hi + pad, J, t0, T, N_fd);
}

void write_field_csv(const Fd1DField& field, const std::string& path) {
  CsvWriter out(path);
  out.header({"t", "x", "component", "value"});
  for (Index l = 0; l <= field.grid.N_fd; ++l) {
    const Matrix& u = field.levels[static_cast<size_t>(l)];
    const double t = field.grid.time_level(l);
    for (Index j = 0; j <= field.grid.J; ++j) {
      for (Index c = 0; c < field.k_dim; ++c) {
        out.begin_row();
        out.cell(t);
        out.cell(field.grid.node(j));
        out.cell(c);
        out.cell(u(j, c));
        out.end_row();
      }
    }
  }
  out.close();
}

}  // namespace nmc
