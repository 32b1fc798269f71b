#include "nmc/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nmc/csv.hpp"
#include "nmc/parallel.hpp"

namespace nmc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRidge = 1e-10;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double horner(const Vector& coeffs, double x) {
  double v = 0.0;
  for (Index i = coeffs.size(); i-- > 0;) v = v * x + coeffs[i];
  return v;
}

// Shared-workspace least squares; see regress_conditional for the contract.
class Regressor {
 public:
  Regressor(const RegressionBasis& basis, Index M, Index k)
      : basis_(&basis),
        P_(basis.size()),
        Phi_(M, P_),
        mu_(P_),
        s_(P_),
        A_(P_, P_),
        B_(P_, k),
        beta_(P_, k),
        means_(k),
        v_(P_, k) {}

  void fit(const Eigen::Ref<const Matrix>& states, const Matrix& values, Index step,
           int workers, Matrix& fitted) {
    const Index M = states.rows();
    if (!values.allFinite())
      throw DegenerateBasis("non-finite responses entered the regression", step);
    parallel_for(M, workers, [&](Index begin, Index end) {
      Vector x(states.cols());
      for (Index p = begin; p < end; ++p) {
        x = states.row(p).transpose();
        basis_->eval(x, Phi_.row(p));
      }
    });
    if (!Phi_.allFinite())
      throw DegenerateBasis("non-finite basis features", step);

    mu_ = Phi_.colwise().mean();
    Phi_.rowwise() -= mu_;
    live_ = 0;
    for (Index j = 0; j < P_; ++j) {
      const double spread = std::sqrt(Phi_.col(j).squaredNorm() / static_cast<double>(M));
      if (spread > 1e-13 * (1.0 + std::abs(mu_[j]))) {
        Phi_.col(j) /= spread;
        s_[j] = spread;
        ++live_;
      } else {
        Phi_.col(j).setZero();  // constant column; the intercept covers it
        s_[j] = 0.0;
      }
    }

    A_.noalias() = Phi_.transpose() * Phi_;
    const double eps = kRidge * std::max(A_.trace() / std::max<Index>(live_, 1), 1e-300);
    A_.diagonal().array() += eps;
    B_.noalias() = Phi_.transpose() * values;
    ldlt_.compute(A_);
    if (ldlt_.info() != Eigen::Success)
      throw DegenerateBasis("normal equations could not be factorized", step);
    beta_ = ldlt_.solve(B_);
    means_ = values.colwise().mean();
    fitted.noalias() = Phi_ * beta_;
    fitted.rowwise() += means_;
  }

  // Worst inner product of the residuals with the raw (uncentered,
  // unscaled) basis columns, normalized by the path count.
  double orthogonality(const Matrix& resid) {
    const double M = static_cast<double>(resid.rows());
    v_.noalias() = Phi_.transpose() * resid;
    const Eigen::RowVectorXd sums = resid.colwise().sum();
    double worst = sums.cwiseAbs().maxCoeff() / M;  // the constant function
    for (Index j = 0; j < P_; ++j)
      for (Index c = 0; c < resid.cols(); ++c) {
        const double raw = s_[j] * v_(j, c) + mu_[j] * sums[c];
        worst = std::max(worst, std::abs(raw) / M);
      }
    return worst;
  }

  Index live() const { return live_; }

 private:
  const RegressionBasis* basis_;
  Index P_;
  RowMajorMatrix Phi_;
  Eigen::RowVectorXd mu_, s_;
  Matrix A_, B_, beta_;
  Eigen::RowVectorXd means_;
  Matrix v_;
  Eigen::LDLT<Matrix> ldlt_;
  Index live_ = 0;
};

struct SweepFlags {
  bool store_full = false;
  bool want_ortho = false;
};

struct SweepData {
  Matrix Y0, xi;       // M x k each; xi = Y0 + sum of martingale increments
  Matrix Yfull, dMfull;
  Vector ortho;
  Index basis_size = 0;
};

SweepData backward_sweep(const BsdePathData& paths, const ConvexDomain& domain,
                         const NeumannProblem& problem, const BasisSpec& bspec,
                         const Stepping& stepping, const SweepFlags& flags, int workers) {
  const Index M = paths.paths(), N = paths.grid.N, d = paths.dim, k = problem.k_dim;
  if (!problem.g) throw InvalidInput("backward solve: terminal condition g is required");
  if (k < 1) throw InvalidInput("backward solve: k_dim must be >= 1");
  if (M < 1) throw InvalidInput("backward solve: empty ensemble");
  if (domain.dim() != d) throw InvalidInput("backward solve: domain/ensemble dim mismatch");
  const bool has_h = static_cast<bool>(problem.h);
  if (has_h && paths.dk.size() == 0)
    throw InvalidInput(
        "backward solve: the problem has a boundary driver but the ensemble was stored "
        "without boundary increments");
  const bool has_f = static_cast<bool>(problem.f);

  RegressionBasis basis(domain, bspec);
  Regressor reg(basis, M, k);

  SweepData out;
  out.basis_size = basis.size();
  out.ortho = Vector::Zero(N);
  out.xi = Matrix::Zero(M, k);
  if (flags.store_full) {
    out.Yfull.resize(M, (N + 1) * k);
    out.dMfull.resize(M, N * k);
  }

  Matrix Ynext(M, k), Ycur(M, k), fitted(M, k), resid(M, k);
  parallel_for(M, workers, [&](Index begin, Index end) {
    Vector x(d), gv(k);
    for (Index p = begin; p < end; ++p) {
      x = paths.node(N).row(p).transpose();
      problem.g(x, gv);
      Ynext.row(p) = gv;
    }
  });
  if (flags.store_full) out.Yfull.middleCols(N * k, k) = Ynext;

  const double dt = paths.grid.dt();
  const bool picard = stepping.kind == Stepping::Kind::Picard;
  Vector first_delta, last_delta;
  if (picard) {
    first_delta.resize(M);
    last_delta.resize(M);
  }

  for (Index i = N; i-- > 0;) {
    const double t = paths.grid.time(i);
    const auto states = paths.node(i);
    reg.fit(states, Ynext, i, workers, fitted);

    resid = Ynext - fitted;
    out.xi += resid;
    if (flags.store_full) out.dMfull.middleCols(i * k, k) = resid;
    if (flags.want_ortho) out.ortho[i] = reg.orthogonality(resid);

    if (!has_f && !has_h) {
      Ycur = fitted;
    } else {
      parallel_for(M, workers, [&](Index begin, Index end) {
        Vector x(d), y0(k), y(k), yn(k), fv(k), hv(k);
        for (Index p = begin; p < end; ++p) {
          x = states.row(p).transpose();
          y0 = fitted.row(p).transpose();
          const double dkv = has_h ? paths.dk(p, i) : 0.0;
          if (!picard) {
            yn = y0;
            if (has_f) {
              problem.f(t, x, y0, fv);
              yn += dt * fv;
            }
            if (dkv != 0.0) {
              problem.h(t, x, y0, hv);
              yn -= dkv * hv;
            }
          } else {
            y = y0;
            double first = -1.0, last = 0.0;
            for (int it = 0; it < stepping.iterations; ++it) {
              yn = y0;
              if (has_f) {
                problem.f(t, x, y, fv);
                yn += dt * fv;
              }
              if (dkv != 0.0) {
                problem.h(t, x, y, hv);
                yn -= dkv * hv;
              }
              const double delta = (yn - y).lpNorm<Eigen::Infinity>();
              if (first < 0.0) first = delta;
              last = delta;
              y = yn;
            }
            first_delta[p] = first;
            last_delta[p] = last;
          }
          Ycur.row(p) = yn;
        }
      });
      if (picard && stepping.iterations > 1) {
        Index bad = 0;
        for (Index p = 0; p < M; ++p)
          if (last_delta[p] > first_delta[p] && last_delta[p] > 1e-8) ++bad;
        if (bad > 0)
          throw ConvergenceFailure(
              "Picard iteration diverging at backward step " + std::to_string(i) + " on " +
              std::to_string(bad) + " paths; reduce the time step or the driver strength");
      }
    }

    if (flags.store_full) out.Yfull.middleCols(i * k, k) = Ycur;
    Ynext.swap(Ycur);
  }

  out.Y0 = std::move(Ynext);
  out.xi += out.Y0;
  return out;
}

}  // namespace

NeumannProblem eigenfunction_problem(double lambda, int mode, double lo, double hi) {
  if (!(hi > lo) || mode < 1)
    throw InvalidInput("eigenfunction_problem: needs lo < hi and mode >= 1");
  NeumannProblem p;
  p.k_dim = 1;
  const double freq = mode * kPi / (hi - lo);
  p.f = [lambda](double, const Vector&, const Vector& y, Vector& out) {
    out[0] = -lambda * y[0];
  };
  p.g = [freq, lo](const Vector& x, Vector& out) { out[0] = std::cos(freq * (x[0] - lo)); };
  p.monotonicity_alpha = -lambda;
  p.growth_c1 = std::abs(lambda);
  p.growth_c2 = 1.0;
  return p;
}

NeumannProblem robin_problem(double coupling) {
  NeumannProblem p;
  p.k_dim = 1;
  p.h = [coupling](double, const Vector&, const Vector& y, Vector& out) {
    out[0] = coupling * y[0];
  };
  p.g = [](const Vector&, Vector& out) { out[0] = 1.0; };
  p.lipschitz_beta = std::abs(coupling);
  p.growth_c2 = 1.0;
  return p;
}

NeumannProblem constant_driver_problem(Vector f0, Vector h0, Vector g0) {
  const Index k = g0.size();
  if (k < 1) throw InvalidInput("constant_driver_problem: g0 must be nonempty");
  if (f0.size() != 0 && f0.size() != k)
    throw InvalidInput("constant_driver_problem: f0 size mismatch");
  if (h0.size() != 0 && h0.size() != k)
    throw InvalidInput("constant_driver_problem: h0 size mismatch");
  NeumannProblem p;
  p.k_dim = k;
  if (f0.size())
    p.f = [f0](double, const Vector&, const Vector&, Vector& out) { out = f0; };
  if (h0.size())
    p.h = [h0](double, const Vector&, const Vector&, Vector& out) { out = h0; };
  p.g = [g0](const Vector&, Vector& out) { out = g0; };
  p.growth_c1 = std::max(f0.size() ? f0.cwiseAbs().maxCoeff() : 0.0,
                         h0.size() ? h0.cwiseAbs().maxCoeff() : 0.0);
  p.growth_c2 = g0.cwiseAbs().maxCoeff();
  return p;
}

NeumannProblem polynomial_problem(Vector g_poly, Vector f_poly, double f_y, Vector h_poly,
                                  double h_y) {
  if (g_poly.size() < 1) throw InvalidInput("polynomial_problem: g_poly must be nonempty");
  NeumannProblem p;
  p.k_dim = 1;
  p.g = [g_poly](const Vector& x, Vector& out) { out[0] = horner(g_poly, x[0]); };
  if (f_poly.size() != 0 || f_y != 0.0)
    p.f = [f_poly, f_y](double, const Vector& x, const Vector& y, Vector& out) {
      out[0] = horner(f_poly, x[0]) + f_y * y[0];
    };
  if (h_poly.size() != 0 || h_y != 0.0)
    p.h = [h_poly, h_y](double, const Vector& x, const Vector& y, Vector& out) {
      out[0] = horner(h_poly, x[0]) + h_y * y[0];
    };
  p.monotonicity_alpha = f_y;
  p.lipschitz_beta = std::abs(h_y);
  p.growth_c1 = (f_poly.size() ? f_poly.cwiseAbs().sum() : 0.0) + std::abs(f_y);
  p.growth_c2 = g_poly.cwiseAbs().sum();
  p.growth_exponent = std::max<double>(1.0, static_cast<double>(g_poly.size()) - 1.0);
  return p;
}

RegressionBasis::RegressionBasis(const ConvexDomain& domain, const BasisSpec& spec)
    : domain_(&domain), spec_(spec) {
  if (spec.degree < 1 || spec.degree > 10)
    throw InvalidInput("BasisSpec: degree must be in [1, 10]");
  if (domain.dim() > 8)
    throw InvalidInput("RegressionBasis: supports dimension <= 8");
  const Index d = domain.dim();
  std::vector<int> cur(static_cast<std::size_t>(d), 0);
  // all exponent tuples with total degree <= cap, constant first
  std::function<void(Index, int)> rec = [&](Index pos, int rem) {
    if (pos == d) {
      exponents_.push_back(cur);
      return;
    }
    for (int e = 0; e <= rem; ++e) {
      cur[static_cast<std::size_t>(pos)] = e;
      rec(pos + 1, rem - e);
    }
    cur[static_cast<std::size_t>(pos)] = 0;
  };
  rec(0, spec.degree);
  size_ = static_cast<Index>(exponents_.size()) + (spec.boundary_features ? 2 : 0);
}

void RegressionBasis::eval(const Eigen::Ref<const Vector>& x,
                           Eigen::Ref<Eigen::RowVectorXd> row) const {
  const Index d = domain_->dim();
  double pw[8][11];
  for (Index j = 0; j < d; ++j) {
    pw[j][0] = 1.0;
    for (int e = 1; e <= spec_.degree; ++e) pw[j][e] = pw[j][e - 1] * x[j];
  }
  Index idx = 0;
  for (const auto& exps : exponents_) {
    double v = 1.0;
    for (Index j = 0; j < d; ++j) v *= pw[j][exps[static_cast<std::size_t>(j)]];
    row[idx++] = v;
  }
  if (spec_.boundary_features) {
    row[idx++] = domain_->boundary_distance(x);
    row[idx++] = std::max(0.0, -domain_->level(x));
  }
}

RegressionFit regress_conditional(const RegressionBasis& basis,
                                  const Eigen::Ref<const Matrix>& states,
                                  const Eigen::Ref<const Matrix>& values, Index step,
                                  int workers) {
  if (states.rows() != values.rows())
    throw InvalidInput("regress_conditional: states/values row mismatch");
  Regressor reg(basis, states.rows(), values.cols());
  RegressionFit fit;
  fit.fitted.resize(values.rows(), values.cols());
  Matrix vals = values;
  reg.fit(states, vals, step, workers, fit.fitted);
  const Matrix resid = vals - fit.fitted;
  fit.ortho = reg.orthogonality(resid);
  fit.live = reg.live();
  return fit;
}

BsdeSolution solve_bsde(const BsdePathData& paths, const ConvexDomain& domain,
                        const NeumannProblem& problem, const BasisSpec& basis,
                        const Stepping& stepping, int workers) {
  SweepFlags flags;
  flags.store_full = true;
  flags.want_ortho = true;
  SweepData data = backward_sweep(paths, domain, problem, basis, stepping, flags, workers);
  BsdeSolution sol;
  sol.grid = paths.grid;
  sol.scheme = paths.scheme;
  sol.k_dim = problem.k_dim;
  sol.Y = std::move(data.Yfull);
  sol.dM = std::move(data.dMfull);
  sol.step_orthogonality = std::move(data.ortho);
  sol.basis_size = data.basis_size;
  return sol;
}

FieldEstimate evaluate_field(const DiffusionSpec& spec, const ConvexDomain& domain,
                             const NeumannProblem& problem, const BasisSpec& basis,
                             const Stepping& stepping, double t, const Vector& x, double T,
                             const Scheme& scheme, Index N, Index M, std::uint64_t seed,
                             int workers) {
  if (!problem.g) throw InvalidInput("evaluate_field: terminal condition g is required");
  if (x.size() != domain.dim() || !all_finite(x))
    throw InvalidInput("evaluate_field: x must be a finite vector matching the domain");
  if (!scheme.is_penalized() && !domain.contains(x))
    throw InvalidInput("evaluate_field: x outside the closure with the reflected scheme");
  if (!(t <= T) || !std::isfinite(t) || !std::isfinite(T))
    throw InvalidInput("evaluate_field: requires finite t <= T");
  if (M < 2) throw InvalidInput("evaluate_field: M must be >= 2");

  FieldEstimate est;
  est.t = t;
  est.x = x;
  est.scheme = scheme;
  est.M = M;
  est.N = N;
  est.seed = seed;

  if (t == T) {
    est.value.resize(problem.k_dim);
    problem.g(x, est.value);
    est.std_error = Vector::Zero(problem.k_dim);
    return est;
  }

  const TimeGrid grid(t, T, N);
  const bool store_dk = static_cast<bool>(problem.h);
  const BsdePathData paths =
      simulate_for_bsde(spec, domain, scheme, grid, x, M, seed, workers, store_dk);
  SweepFlags flags;  // no full storage, no diagnostics
  const SweepData data =
      backward_sweep(paths, domain, problem, basis, stepping, flags, workers);

  const Index k = problem.k_dim;
  est.value.resize(k);
  est.std_error.resize(k);
  for (Index c = 0; c < k; ++c) {
    est.value[c] = data.Y0.col(c).mean();
    const double mean = data.xi.col(c).mean();
    const double var =
        (data.xi.col(c).array() - mean).square().sum() / static_cast<double>(M - 1);
    est.std_error[c] = std::sqrt(var / static_cast<double>(M));
  }
  return est;
}

MartingaleReport martingale_residual_report(const BsdeSolution& solution,
                                            const BsdePathData& paths,
                                            const ConvexDomain& domain,
                                            const BasisSpec& bspec) {
  const Index M = paths.paths(), N = paths.grid.N, k = solution.k_dim;
  if (solution.dM.size() == 0)
    throw InvalidInput("martingale_residual_report: solution has no stored increments");
  if (solution.dM.rows() != M || solution.dM.cols() != N * k)
    throw InvalidInput("martingale_residual_report: solution/ensemble shape mismatch");
  RegressionBasis basis(domain, bspec);
  const Index P = basis.size();

  MartingaleReport rep;
  rep.step_orthogonality.resize(N);
  Matrix totals = Matrix::Zero(M, k);
  RowMajorMatrix Phi(M, P);
  Vector x(paths.dim);
  for (Index i = 0; i < N; ++i) {
    for (Index p = 0; p < M; ++p) {
      x = paths.node(i).row(p).transpose();
      basis.eval(x, Phi.row(p));
    }
    const auto resid = solution.dM.middleCols(i * k, k);
    const Matrix v = Phi.transpose() * resid;
    rep.step_orthogonality[i] = v.cwiseAbs().maxCoeff() / static_cast<double>(M);
    totals += resid;
  }
  rep.max_orthogonality = N > 0 ? rep.step_orthogonality.maxCoeff() : 0.0;

  rep.total_mean.resize(k);
  rep.total_std_error.resize(k);
  for (Index c = 0; c < k; ++c) {
    const double mean = totals.col(c).mean();
    rep.total_mean[c] = mean;
    const double var = M > 1 ? (totals.col(c).array() - mean).square().sum() /
                                   static_cast<double>(M - 1)
                             : 0.0;
    rep.total_std_error[c] = std::sqrt(var / static_cast<double>(M));
  }
  return rep;
}

void write_solution_csv(const BsdeSolution& solution, const std::string& path) {
  const Index k = solution.k_dim;
  const Index N = solution.grid.N;
  const Index M = solution.Y.rows();
  CsvWriter csv(path);
  std::vector<std::string> header{"path_id", "step"};
  for (Index c = 0; c < k; ++c) header.push_back("y_" + std::to_string(c));
  for (Index c = 0; c < k; ++c) header.push_back("dm_" + std::to_string(c));
  csv.header(header);
  for (Index p = 0; p < M; ++p) {
    for (Index i = 0; i <= N; ++i) {
      csv.begin_row();
      csv.cell(p);
      csv.cell(i);
      for (Index c = 0; c < k; ++c) csv.cell(solution.Y(p, i * k + c));
      for (Index c = 0; c < k; ++c) {
        if (i < N)
          csv.cell(solution.dM(p, i * k + c));
        else
          csv.cell(std::string());
      }
      csv.end_row();
    }
  }
  csv.close();
}

void write_field_estimates_csv(const std::vector<FieldEstimate>& estimates,
                               const std::string& path) {
  if (estimates.empty()) throw InvalidInput("write_field_estimates_csv: no estimates");
  const Index d = estimates.front().x.size();
  const Index k = estimates.front().value.size();
  CsvWriter csv(path);
  std::vector<std::string> header{"t"};
  for (Index c = 0; c < d; ++c) header.push_back("x_" + std::to_string(c));
  header.push_back("n_or_reflected");
  for (Index c = 0; c < k; ++c) header.push_back("value_" + std::to_string(c));
  for (Index c = 0; c < k; ++c) header.push_back("stderr_" + std::to_string(c));
  header.insert(header.end(), {"M", "N", "seed"});
  csv.header(header);
  for (const FieldEstimate& e : estimates) {
    if (e.x.size() != d || e.value.size() != k)
      throw InvalidInput("write_field_estimates_csv: inconsistent estimate dimensions");
    csv.begin_row();
    csv.cell(e.t);
    for (Index c = 0; c < d; ++c) csv.cell(e.x(c));
    csv.cell(e.scheme.is_penalized() ? format_double(e.scheme.n) : std::string("reflected"));
    for (Index c = 0; c < k; ++c) csv.cell(e.value(c));
    for (Index c = 0; c < k; ++c) csv.cell(e.std_error(c));
    csv.cell(static_cast<Index>(e.M));
    csv.cell(static_cast<Index>(e.N));
    csv.cell(std::to_string(e.seed));
    csv.end_row();
  }
  csv.close();
}

}  // namespace nmc
