#include "nmc/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmc/csv.hpp"
#include "nmc/parallel.hpp"
#include "nmc/rng.hpp"

namespace nmc {

namespace {

void validate_spec(const DiffusionSpec& spec) {
  if (spec.dim < 1 || spec.noise_dim < 1)
    throw InvalidInput("DiffusionSpec: dim and noise_dim must be >= 1");
  if (!std::isfinite(spec.sigma_scale))
    throw InvalidInput("DiffusionSpec: sigma_scale must be finite");
  if (spec.drift_const.size() != 0 && spec.drift_const.size() != spec.dim)
    throw InvalidInput("DiffusionSpec: drift_const must have length dim");
  if (spec.sigma_const.size() != 0 &&
      (spec.sigma_const.rows() != spec.dim || spec.sigma_const.cols() != spec.noise_dim))
    throw InvalidInput("DiffusionSpec: sigma_const must be dim x noise_dim");
  if (!spec.diffusion && spec.sigma_const.size() == 0 && spec.noise_dim != spec.dim)
    throw InvalidInput("DiffusionSpec: scaled-identity diffusion needs noise_dim == dim");
  if (spec.drift_const.size() != 0 && !all_finite(spec.drift_const))
    throw InvalidInput("DiffusionSpec: drift_const must be finite");
  if (spec.sigma_const.size() != 0 && !spec.sigma_const.allFinite())
    throw InvalidInput("DiffusionSpec: sigma_const must be finite");
}

void validate_start(const ConvexDomain& domain, const DiffusionSpec& spec, const Vector& x0,
                    bool require_inside) {
  if (domain.dim() != spec.dim)
    throw InvalidInput("domain dimension does not match diffusion dimension");
  if (x0.size() != spec.dim || !all_finite(x0))
    throw InvalidInput("start point must be a finite vector of length dim");
  if (require_inside && !domain.contains(x0))
    throw InvalidInput("start point lies outside the closed domain");
}

// One-trajectory integrator with a preallocated workspace; step() performs
// no heap allocation.
class Stepper {
 public:
  Stepper(const DiffusionSpec& spec, const ConvexDomain& domain, const Scheme& scheme,
          const TimeGrid& grid)
      : spec_(&spec),
        domain_(&domain),
        scheme_(scheme),
        dt_(grid.dt()),
        lambda_(scheme.n * grid.dt()),
        drift_form_(spec.drift ? Form::Fn
                               : (spec.drift_const.size() ? Form::Constant : Form::Zero)),
        sigma_form_(spec.diffusion ? Form::Fn
                                   : (spec.sigma_const.size() ? Form::Constant : Form::Zero)) {
    const Index d = spec.dim;
    X_.resize(d);
    K_.resize(d);
    V_.resize(d);
    Wacc_.resize(spec.noise_dim);
    incr_.resize(d);
    vnew_.resize(d);
    pre_.resize(d);
    xnew_.resize(d);
    dK_.resize(d);
    grad_.resize(d);
    delta_.resize(d);
    btmp_.resize(d);
    sig_.resize(d, spec.noise_dim);
  }

  void reset(const Vector& x0) {
    X_ = x0;
    K_.setZero();
    V_ = x0;
    Wacc_.setZero();
    k_ = 0.0;
    dk_ = 0.0;
    dK_.setZero();
  }

  // Advance one node given the Brownian increment over the step.
  void step(const Eigen::Ref<const Vector>& dw) {
    Wacc_ += dw;
    switch (sigma_form_) {
      case Form::Zero:
        incr_ = spec_->sigma_scale * dw;
        break;
      case Form::Constant:
        incr_.noalias() = spec_->sigma_const * dw;
        break;
      case Form::Fn:
        spec_->diffusion(X_, sig_);
        incr_.noalias() = sig_ * dw;
        break;
    }
    switch (drift_form_) {
      case Form::Zero:
        break;
      case Form::Constant:
        incr_ += dt_ * spec_->drift_const;
        break;
      case Form::Fn:
        spec_->drift(X_, btmp_);
        incr_ += dt_ * btmp_;
        break;
    }
    // The stored free term V is the primary record; the step consumes
    // exactly V_{i+1} - V_i so the pre-constraint point can be recomputed
    // bitwise from the outputs.
    vnew_ = V_ + incr_;
    pre_ = X_ + (vnew_ - V_);
    V_.swap(vnew_);

    switch (scheme_.kind) {
      case Scheme::Kind::Reflected:
        domain_->project(pre_, xnew_);
        break;
      case Scheme::Kind::Penalized:
        resolvent_delta(*domain_, pre_, lambda_, xnew_);
        break;
      case Scheme::Kind::PenalizedExplicit:
        penalization_delta(*domain_, X_, delta_);
        xnew_ = pre_ - lambda_ * delta_;
        if (!all_finite(xnew_))
          throw SchemeFailure(
              "explicit penalized step diverged; use the semi-implicit scheme or reduce "
              "n * dt");
        break;
    }

    dK_ = pre_ - xnew_;
    if (dK_.isZero(0.0)) {
      dk_ = 0.0;
    } else {
      K_ += dK_;
      domain_->grad_level(xnew_, grad_);
      dk_ = grad_.dot(dK_);
      k_ += dk_;
    }
    X_.swap(xnew_);
  }

  const Vector& X() const { return X_; }
  const Vector& K() const { return K_; }
  const Vector& V() const { return V_; }
  const Vector& W() const { return Wacc_; }
  const Vector& dK() const { return dK_; }
  double k() const { return k_; }
  double dk() const { return dk_; }

 private:
  enum class Form { Zero, Constant, Fn };

  const DiffusionSpec* spec_;
  const ConvexDomain* domain_;
  Scheme scheme_;
  double dt_;
  double lambda_;
  Form drift_form_;
  Form sigma_form_;

  Vector X_, K_, V_, Wacc_, incr_, vnew_, pre_, xnew_, dK_, grad_, delta_, btmp_;
  Matrix sig_;
  double k_ = 0.0;
  double dk_ = 0.0;
};

// Canonical Brownian increments: always the difference of consecutive
// cumulated path values, so the streaming loops see bitwise the same draws
// as code that materializes W via sample_brownian.
class BrownianFeed {
 public:
  BrownianFeed(Index r, double sqrt_dt)
      : sqrt_dt_(sqrt_dt), W_(Vector::Zero(r)), Wn_(r), z_(r), dw_(r) {}

  void reset() { W_.setZero(); }

  const Vector& next(std::uint64_t seed, std::uint64_t path, std::uint32_t step) {
    fill_normals(seed, path, step, z_);
    Wn_ = W_ + sqrt_dt_ * z_;
    dw_ = Wn_ - W_;
    W_.swap(Wn_);
    return dw_;
  }

 private:
  double sqrt_dt_;
  Vector W_, Wn_, z_, dw_;
};

ForwardPath simulate_with_increments(const DiffusionSpec& spec, const ConvexDomain& domain,
                                     const Scheme& scheme, const TimeGrid& grid,
                                     const Vector& x0, const Matrix& W) {
  if (W.rows() != grid.N + 1 || W.cols() != spec.noise_dim)
    throw InvalidInput("Brownian path must be (N+1) x noise_dim");
  if (!W.allFinite() || !W.row(0).isZero(0.0))
    throw InvalidInput("Brownian path must be finite and start at zero");

  ForwardPath path;
  path.grid = grid;
  path.scheme = scheme;
  const Index N = grid.N, d = spec.dim, r = spec.noise_dim;
  path.X.resize(N + 1, d);
  path.K.resize(N + 1, d);
  path.k.resize(N + 1);
  path.W = W;
  path.V.resize(N + 1, d);

  Stepper st(spec, domain, scheme, grid);
  st.reset(x0);
  path.X.row(0) = x0;
  path.K.row(0).setZero();
  path.k[0] = 0.0;
  path.V.row(0) = x0;
  Vector dw(r);
  for (Index i = 0; i < N; ++i) {
    dw = W.row(i + 1) - W.row(i);
    st.step(dw);
    path.X.row(i + 1) = st.X();
    path.K.row(i + 1) = st.K();
    path.k[i + 1] = st.k();
    path.V.row(i + 1) = st.V();
  }
  return path;
}

}  // namespace

DiffusionSpec DiffusionSpec::brownian(Index d, double scale) {
  DiffusionSpec spec;
  spec.dim = d;
  spec.noise_dim = d;
  spec.sigma_scale = scale;
  spec.sigma_bound = std::abs(scale);
  spec.ellipticity = scale * scale;
  validate_spec(spec);
  return spec;
}

DiffusionSpec DiffusionSpec::constant_drift(Vector b, double scale) {
  DiffusionSpec spec;
  spec.dim = b.size();
  spec.noise_dim = b.size();
  spec.sigma_scale = scale;
  spec.drift_bound = b.norm();
  spec.sigma_bound = std::abs(scale);
  spec.ellipticity = scale * scale;
  spec.drift_const = std::move(b);
  validate_spec(spec);
  return spec;
}

DiffusionSpec DiffusionSpec::constant_coefficients(Vector b, Matrix sigma) {
  DiffusionSpec spec;
  spec.dim = sigma.rows();
  spec.noise_dim = sigma.cols();
  if (b.size() != 0 && b.size() != spec.dim)
    throw InvalidInput("constant_coefficients: drift length must match sigma rows");
  spec.drift_bound = b.size() ? b.norm() : 0.0;
  if (b.size()) spec.drift_const = std::move(b);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma * sigma.transpose());
  spec.sigma_bound = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  spec.ellipticity = std::max(0.0, es.eigenvalues().minCoeff());
  spec.sigma_const = std::move(sigma);
  validate_spec(spec);
  return spec;
}

DiffusionSpec DiffusionSpec::general(Index d, Index r,
                                     std::function<void(const Vector&, Vector&)> drift_fn,
                                     std::function<void(const Vector&, Matrix&)> diffusion_fn,
                                     double drift_bound, double sigma_bound,
                                     double ellipticity) {
  DiffusionSpec spec;
  spec.dim = d;
  spec.noise_dim = r;
  spec.drift = std::move(drift_fn);
  spec.diffusion = std::move(diffusion_fn);
  spec.drift_bound = drift_bound;
  spec.sigma_bound = sigma_bound;
  spec.ellipticity = ellipticity;
  validate_spec(spec);
  return spec;
}

CoefficientBounds sample_coefficient_bounds(const DiffusionSpec& spec, const Vector& lo,
                                            const Vector& hi, Index samples,
                                            std::uint64_t seed) {
  validate_spec(spec);
  if (lo.size() != spec.dim || hi.size() != spec.dim)
    throw InvalidInput("sample_coefficient_bounds: box must match dim");
  CoefficientBounds out;
  out.min_eigen_sigma2 = std::numeric_limits<double>::infinity();
  Vector x(spec.dim), b(spec.dim);
  Matrix sig(spec.dim, spec.noise_dim);
  for (Index s = 0; s < samples; ++s) {
    for (Index j = 0; j < spec.dim; ++j)
      x[j] = lo[j] + (hi[j] - lo[j]) * uniform01(seed, static_cast<std::uint64_t>(s),
                                                 static_cast<std::uint32_t>(j), 0);
    if (spec.drift) {
      spec.drift(x, b);
      out.max_drift_norm = std::max(out.max_drift_norm, b.norm());
    } else if (spec.drift_const.size()) {
      out.max_drift_norm = spec.drift_const.norm();
    }
    if (spec.diffusion) {
      spec.diffusion(x, sig);
    } else if (spec.sigma_const.size()) {
      sig = spec.sigma_const;
    } else {
      sig = spec.sigma_scale * Matrix::Identity(spec.dim, spec.dim);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(sig * sig.transpose());
    out.max_sigma_norm =
        std::max(out.max_sigma_norm, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
    out.min_eigen_sigma2 = std::min(out.min_eigen_sigma2, es.eigenvalues().minCoeff());
  }
  return out;
}

Matrix sample_brownian(const TimeGrid& grid, Index r, std::uint64_t seed,
                       std::uint64_t path_index) {
  if (r < 1) throw InvalidInput("sample_brownian: noise dimension must be >= 1");
  Matrix W(grid.N + 1, r);
  W.row(0).setZero();
  const double sqrt_dt = std::sqrt(grid.dt());
  Vector z(r);
  for (Index i = 0; i < grid.N; ++i) {
    fill_normals(seed, path_index, static_cast<std::uint32_t>(i), z);
    W.row(i + 1) = W.row(i) + sqrt_dt * z.transpose();
  }
  return W;
}

ForwardPath simulate_penalized(const DiffusionSpec& spec, const ConvexDomain& domain,
                               double n, const TimeGrid& grid, const Vector& x0,
                               const Matrix& W, bool explicit_scheme) {
  validate_spec(spec);
  validate_start(domain, spec, x0, true);
  const Scheme scheme = explicit_scheme ? Scheme::penalized_explicit(n) : Scheme::penalized(n);
  return simulate_with_increments(spec, domain, scheme, grid, x0, W);
}

ForwardPath simulate_reflected(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const TimeGrid& grid, const Vector& x0, const Matrix& W) {
  validate_spec(spec);
  validate_start(domain, spec, x0, true);
  return simulate_with_increments(spec, domain, Scheme::reflected(), grid, x0, W);
}

PathEnsemble simulate_ensemble(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid, const Vector& x0,
                               Index M, std::uint64_t seed, int workers) {
  validate_spec(spec);
  validate_start(domain, spec, x0, true);
  if (M < 1) throw InvalidInput("simulate_ensemble: M must be >= 1");
  PathEnsemble ens;
  ens.grid = grid;
  ens.scheme = scheme;
  ens.seed = seed;
  ens.paths.resize(static_cast<std::size_t>(M));
  parallel_for(M, workers, [&](Index begin, Index end) {
    for (Index p = begin; p < end; ++p) {
      const Matrix W = sample_brownian(grid, spec.noise_dim, seed, static_cast<std::uint64_t>(p));
      ens.paths[static_cast<std::size_t>(p)] =
          simulate_with_increments(spec, domain, scheme, grid, x0, W);
    }
  });
  return ens;
}

CoupledDistances couple_and_compare(const DiffusionSpec& spec, const ConvexDomain& domain,
                                    double n, const TimeGrid& grid, const Vector& x0,
                                    std::uint64_t seed, Index M, int workers) {
  validate_spec(spec);
  validate_start(domain, spec, x0, true);
  if (M < 1) throw InvalidInput("couple_and_compare: M must be >= 1");
  CoupledDistances out;
  out.sup_X.resize(M);
  out.sup_K.resize(M);
  parallel_for(M, workers, [&](Index begin, Index end) {
    Stepper pen(spec, domain, Scheme::penalized(n), grid);
    Stepper ref(spec, domain, Scheme::reflected(), grid);
    BrownianFeed feed(spec.noise_dim, std::sqrt(grid.dt()));
    for (Index p = begin; p < end; ++p) {
      pen.reset(x0);
      ref.reset(x0);
      feed.reset();
      double sx = 0.0, sk = 0.0;
      for (Index i = 0; i < grid.N; ++i) {
        const Vector& dw =
            feed.next(seed, static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(i));
        pen.step(dw);
        ref.step(dw);
        sx = std::max(sx, (pen.X() - ref.X()).norm());
        sk = std::max(sk, (pen.K() - ref.K()).norm());
      }
      out.sup_X[p] = sx;
      out.sup_K[p] = sk;
    }
  });
  return out;
}

TerminalSample simulate_terminal(const DiffusionSpec& spec, const ConvexDomain& domain,
                                 const Scheme& scheme, const TimeGrid& grid, const Vector& x0,
                                 Index M, std::uint64_t seed, int workers) {
  validate_spec(spec);
  validate_start(domain, spec, x0, !scheme.is_penalized());
  if (M < 1) throw InvalidInput("simulate_terminal: M must be >= 1");
  TerminalSample out;
  out.X.resize(M, spec.dim);
  out.K.resize(M, spec.dim);
  out.k.resize(M);
  parallel_for(M, workers, [&](Index begin, Index end) {
    Stepper st(spec, domain, scheme, grid);
    BrownianFeed feed(spec.noise_dim, std::sqrt(grid.dt()));
    for (Index p = begin; p < end; ++p) {
      st.reset(x0);
      feed.reset();
      for (Index i = 0; i < grid.N; ++i)
        st.step(feed.next(seed, static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(i)));
      out.X.row(p) = st.X();
      out.K.row(p) = st.K();
      out.k[p] = st.k();
    }
  });
  return out;
}

PathExtremes simulate_extremes(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid, const Vector& x0,
                               Index M, std::uint64_t seed, int workers) {
  validate_spec(spec);
  validate_start(domain, spec, x0, !scheme.is_penalized());
  if (M < 1) throw InvalidInput("simulate_extremes: M must be >= 1");
  PathExtremes out;
  out.sup_X.resize(M);
  out.sup_K.resize(M);
  out.tv_K.resize(M);
  parallel_for(M, workers, [&](Index begin, Index end) {
    Stepper st(spec, domain, scheme, grid);
    BrownianFeed feed(spec.noise_dim, std::sqrt(grid.dt()));
    for (Index p = begin; p < end; ++p) {
      st.reset(x0);
      feed.reset();
      double sx = x0.norm(), sk = 0.0, tv = 0.0;
      for (Index i = 0; i < grid.N; ++i) {
        st.step(feed.next(seed, static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(i)));
        sx = std::max(sx, st.X().norm());
        sk = std::max(sk, st.K().norm());
        tv += st.dK().norm();
      }
      out.sup_X[p] = sx;
      out.sup_K[p] = sk;
      out.tv_K[p] = tv;
    }
  });
  return out;
}

BsdePathData simulate_for_bsde(const DiffusionSpec& spec, const ConvexDomain& domain,
                               const Scheme& scheme, const TimeGrid& grid, const Vector& x0,
                               Index M, std::uint64_t seed, int workers, bool store_dk) {
  validate_spec(spec);
  validate_start(domain, spec, x0, !scheme.is_penalized());
  if (M < 1) throw InvalidInput("simulate_for_bsde: M must be >= 1");
  BsdePathData out;
  out.grid = grid;
  out.scheme = scheme;
  out.dim = spec.dim;
  out.seed = seed;
  const Index N = grid.N, d = spec.dim;
  out.X.resize(M, (N + 1) * d);
  if (store_dk) out.dk.resize(M, N);
  parallel_for(M, workers, [&](Index begin, Index end) {
    Stepper st(spec, domain, scheme, grid);
    BrownianFeed feed(spec.noise_dim, std::sqrt(grid.dt()));
    for (Index p = begin; p < end; ++p) {
      st.reset(x0);
      feed.reset();
      for (Index j = 0; j < d; ++j) out.X(p, j) = x0[j];
      for (Index i = 0; i < N; ++i) {
        st.step(feed.next(seed, static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(i)));
        for (Index j = 0; j < d; ++j) out.X(p, (i + 1) * d + j) = st.X()[j];
        if (store_dk) out.dk(p, i) = st.dk();
      }
    }
  });
  return out;
}

PenalizedIntegral integrate_penalized_input(const ConvexDomain& domain, double n,
                                            const TimeGrid& grid, const Matrix& V) {
  if (!(n > 0.0)) throw InvalidInput("integrate_penalized_input: n must be > 0");
  if (V.rows() != grid.N + 1 || V.cols() != domain.dim())
    throw InvalidInput("integrate_penalized_input: V must be (N+1) x dim");
  if (!V.allFinite()) throw InvalidInput("integrate_penalized_input: V must be finite");
  const Index N = grid.N, d = domain.dim();
  const double lambda = n * grid.dt();
  PenalizedIntegral out;
  out.X.resize(N + 1, d);
  out.K.resize(N + 1, d);
  out.X.row(0) = V.row(0);
  out.K.row(0).setZero();
  Vector pre(d), xnew(d), x = V.row(0).transpose(), K = Vector::Zero(d);
  for (Index i = 0; i < N; ++i) {
    pre = x + (V.row(i + 1) - V.row(i)).transpose();
    resolvent_delta(domain, pre, lambda, xnew);
    K += pre - xnew;
    out.tv += (pre - xnew).norm();
    x.swap(xnew);
    out.X.row(i + 1) = x;
    out.K.row(i + 1) = K;
  }
  return out;
}

void write_ensemble_csv(const PathEnsemble& ensemble, const std::string& path) {
  if (ensemble.paths.empty()) throw InvalidInput("write_ensemble_csv: empty ensemble");
  const Index d = ensemble.paths.front().X.cols();
  const Index r = ensemble.paths.front().W.cols();
  CsvWriter csv(path);
  std::vector<std::string> header{"path_id", "step", "time"};
  for (Index c = 0; c < d; ++c) header.push_back("x_" + std::to_string(c));
  for (Index c = 0; c < d; ++c) header.push_back("K_" + std::to_string(c));
  header.push_back("k");
  for (Index c = 0; c < r; ++c) header.push_back("w_" + std::to_string(c));
  csv.header(header);
  for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
    const ForwardPath& fp = ensemble.paths[p];
    if (fp.X.cols() != d || fp.W.cols() != r)
      throw InvalidInput("write_ensemble_csv: inconsistent path dimensions");
    for (Index i = 0; i <= fp.grid.N; ++i) {
      csv.begin_row();
      csv.cell(static_cast<Index>(p));
      csv.cell(i);
      csv.cell(fp.grid.time(i));
      for (Index c = 0; c < d; ++c) csv.cell(fp.X(i, c));
      for (Index c = 0; c < d; ++c) csv.cell(fp.K(i, c));
      csv.cell(fp.k(i));
      for (Index c = 0; c < r; ++c) csv.cell(fp.W(i, c));
      csv.end_row();
    }
  }
  csv.close();
}

}  // namespace nmc
