#include "nmc/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "nmc/csv.hpp"
#include "nmc/experiments.hpp"

namespace nmc {

namespace {

namespace fs = std::filesystem;

std::string fmt6(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

std::pair<double, double> bounds_1d(const DomainConfig& d) {
  if (d.kind == "interval") return {d.lo, d.hi};
  if (d.kind == "ellipsoid") return {d.center(0) - d.semi_axes(0), d.center(0) + d.semi_axes(0)};
  return {d.center(0) - d.radius, d.center(0) + d.radius};
}

std::string scheme_label(const Scheme& s) {
  if (!s.is_penalized()) return "reflected";
  const std::string tag = s.kind == Scheme::Kind::Penalized ? "penalized" : "penalized-explicit";
  return tag + "(n = " + fmt6(s.n) + ")";
}

std::string point_label(const Vector& x) {
  std::string s = "(";
  for (Index i = 0; i < x.size(); ++i) s += (i ? ", " : "") + fmt6(x(i));
  return s + ")";
}

OracleSpec to_oracle(const OracleConfig& o) {
  OracleSpec s;
  if (o.kind == "analytic")
    s.kind = OracleSpec::Kind::Analytic;
  else if (o.kind == "finite-difference")
    s.kind = OracleSpec::Kind::FiniteDifference;
  else
    s.kind = OracleSpec::Kind::None;
  s.lambda = o.lambda;
  s.mode = o.mode;
  s.J = o.J;
  s.N_fd = o.N_fd;
  s.J_pen = o.J_pen;
  s.N_pen = o.N_pen;
  s.penalized_side = o.penalized_side;
  return s;
}

std::string artifact_path(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

std::string cmd_simulate(const RunConfig& c, int workers) {
  const ConvexDomain domain = build_domain(c.domain);
  const DiffusionSpec spec = build_diffusion(c.diffusion);
  const TimeGrid grid(c.grid.t0, c.grid.T, c.grid.N);
  const Scheme scheme = build_scheme(c.scheme, c.n);
  const PathEnsemble ens =
      simulate_ensemble(spec, domain, scheme, grid, c.x0, c.ensemble.M, c.ensemble.seed, workers);
  write_ensemble_csv(ens, artifact_path(c.out_dir, "paths.csv"));
  double mean_abs = 0.0, mean_k = 0.0;
  for (const ForwardPath& p : ens.paths) {
    mean_abs += p.X.row(grid.N).norm();
    mean_k += p.k(grid.N);
  }
  mean_abs /= static_cast<double>(ens.paths.size());
  mean_k /= static_cast<double>(ens.paths.size());
  std::string s = "command: simulate-forward\n";
  s += "scheme: " + scheme_label(scheme) + "\n";
  s += "paths: " + std::to_string(c.ensemble.M) + " x " + std::to_string(c.grid.N) +
       " steps on [" + fmt6(grid.t0) + ", " + fmt6(grid.T) + "], dimension " +
       std::to_string(domain.dim()) + "\n";
  s += "seed: " + std::to_string(c.ensemble.seed) + "\n";
  s += "mean terminal |X|: " + fmt6(mean_abs) + "\n";
  s += "mean terminal boundary measure: " + fmt6(mean_k) + "\n";
  s += "artifact: paths.csv\n";
  return s;
}

std::string cmd_solve_bsde(const RunConfig& c, int workers) {
  const ConvexDomain domain = build_domain(c.domain);
  const DiffusionSpec spec = build_diffusion(c.diffusion);
  const TimeGrid grid(c.grid.t0, c.grid.T, c.grid.N);
  const Scheme scheme = build_scheme(c.scheme, c.n);
  const NeumannProblem problem = build_problem(c.problem, c.domain);
  const BsdePathData paths = simulate_for_bsde(spec, domain, scheme, grid, c.x0, c.ensemble.M,
                                               c.ensemble.seed, workers, true);
  const BasisSpec basis{c.basis.degree, c.basis.boundary_features};
  const BsdeSolution sol =
      solve_bsde(paths, domain, problem, basis, build_stepping(c.stepping), workers);
  write_solution_csv(sol, artifact_path(c.out_dir, "bsde.csv"));
  const MartingaleReport mart = martingale_residual_report(sol, paths, domain, basis);
  std::string s = "command: solve-bsde\n";
  s += "problem: " + c.problem.kind + "\n";
  s += "scheme: " + scheme_label(scheme) + "\n";
  s += "basis size: " + std::to_string(sol.basis_size) + "\n";
  const double M = static_cast<double>(sol.Y.rows());
  for (Index cc = 0; cc < sol.k_dim; ++cc) {
    const auto col = sol.node(0).col(cc);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / std::max(1.0, M - 1.0);
    const std::string label =
        sol.k_dim == 1 ? std::string("value at t0") : "value at t0[" + std::to_string(cc) + "]";
    s += label + ": " + fmt6(mean) + " ± " + fmt6(std::sqrt(var / M)) + "\n";
  }
  s += "max step orthogonality: " + fmt6(mart.max_orthogonality) + "\n";
  s += "martingale total mean: " + fmt6(mart.total_mean.cwiseAbs().maxCoeff()) + " (stderr " +
       fmt6(mart.total_std_error.maxCoeff()) + ")\n";
  s += "artifact: bsde.csv\n";
  return s;
}

std::string cmd_evaluate_field(const RunConfig& c, int workers) {
  const ConvexDomain domain = build_domain(c.domain);
  const DiffusionSpec spec = build_diffusion(c.diffusion);
  const TimeGrid grid(c.grid.t0, c.grid.T, c.grid.N);
  const Scheme scheme = build_scheme(c.scheme, c.n);
  const NeumannProblem problem = build_problem(c.problem, c.domain);
  const BasisSpec basis{c.basis.degree, c.basis.boundary_features};
  const Stepping stepping = build_stepping(c.stepping);
  std::vector<FieldEstimate> estimates;
  estimates.reserve(c.points.size());
  for (const PointConfig& p : c.points)
    estimates.push_back(evaluate_field(spec, domain, problem, basis, stepping, p.t, p.x, grid.T,
                                       scheme, grid.N, c.ensemble.M, c.ensemble.seed, workers));
  write_field_estimates_csv(estimates, artifact_path(c.out_dir, "field.csv"));
  std::string s = "command: evaluate-field\n";
  s += "problem: " + c.problem.kind + "\n";
  s += "scheme: " + scheme_label(scheme) + "\n";
  s += "seed: " + std::to_string(c.ensemble.seed) + "\n";
  for (const FieldEstimate& e : estimates) {
    s += "u(t = " + fmt6(e.t) + ", x = " + point_label(e.x) + ") =";
    for (Index cc = 0; cc < e.value.size(); ++cc)
      s += " " + fmt6(e.value(cc)) + " ± " + fmt6(e.std_error(cc));
    s += "\n";
  }
  s += "artifact: field.csv\n";
  return s;
}

int finish_study(const StudyReport& report, const std::string& out_dir, std::string& summary) {
  report.write_csv(artifact_path(out_dir, "study.csv"));
  summary = report.summary();
  if (summary.empty() || summary.back() != '\n') summary += '\n';
  summary += "artifact: study.csv\n";
  if (report.passed()) return 0;
  std::string failed;
  for (const Verdict& v : report.verdicts)
    if (!v.pass) failed += (failed.empty() ? "" : ", ") + v.id;
  std::fprintf(stderr, "%s: verdict failure: %s\n", report.kind.c_str(), failed.c_str());
  return 1;
}

}  // namespace

ConvexDomain build_domain(const DomainConfig& config) {
  if (config.kind == "ball") return ConvexDomain::ball(config.center, config.radius);
  if (config.kind == "ellipsoid") return ConvexDomain::ellipsoid(config.center, config.semi_axes);
  if (config.kind == "interval") return ConvexDomain::interval(config.lo, config.hi);
  throw InvalidInput("build_domain: unknown kind " + config.kind);
}

DiffusionSpec build_diffusion(const DiffusionConfig& config) {
  if (config.kind == "brownian") return DiffusionSpec::brownian(config.dim, config.sigma_scale);
  if (config.kind == "constant-drift")
    return DiffusionSpec::constant_drift(config.drift, config.sigma_scale);
  if (config.kind == "custom-table")
    return DiffusionSpec::constant_coefficients(config.drift, config.sigma);
  throw InvalidInput("build_diffusion: unknown kind " + config.kind);
}

NeumannProblem build_problem(const ProblemConfig& config, const DomainConfig& domain) {
  if (config.kind == "eigenfunction") {
    const auto [lo, hi] = bounds_1d(domain);
    return eigenfunction_problem(config.lambda, config.mode, lo, hi);
  }
  if (config.kind == "robin") return robin_problem(config.coupling);
  if (config.kind == "constant")
    return constant_driver_problem(config.f0, config.h0, config.g0);
  if (config.kind == "custom-polynomial")
    return polynomial_problem(config.g_poly, config.f_poly, config.f_y, config.h_poly,
                              config.h_y);
  throw InvalidInput("build_problem: unknown kind " + config.kind);
}

Scheme build_scheme(const std::string& name, double n) {
  if (name == "reflected") return Scheme::reflected();
  if (name == "penalized") return Scheme::penalized(n);
  if (name == "penalized-explicit") return Scheme::penalized_explicit(n);
  throw InvalidInput("build_scheme: unknown scheme " + name);
}

Stepping build_stepping(const SteppingConfig& config) {
  if (config.kind == "explicit") return Stepping::explicit_step();
  if (config.kind == "picard") return Stepping::picard(config.iterations);
  throw InvalidInput("build_stepping: unknown stepping " + config.kind);
}

int run(const RunConfig& config) {
  if (config.out_dir.empty()) throw InvalidInput("run: output directory not set");
  fs::create_directories(config.out_dir);
  const int workers = config.workers > 0
                          ? config.workers
                          : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const auto start = std::chrono::steady_clock::now();

  std::string summary;
  int code = 0;
  switch (config.command) {
    case Command::SimulateForward:
      summary = cmd_simulate(config, workers);
      break;
    case Command::SolveBsde:
      summary = cmd_solve_bsde(config, workers);
      break;
    case Command::EvaluateField:
      summary = cmd_evaluate_field(config, workers);
      break;
    case Command::StudyForwardConvergence: {
      ForwardStudyConfig f;
      f.spec = build_diffusion(config.diffusion);
      f.domain = build_domain(config.domain);
      f.grid = TimeGrid(config.grid.t0, config.grid.T, config.grid.N);
      f.x0 = config.x0;
      if (!config.n_values.empty()) f.n_values = config.n_values;
      f.M = config.ensemble.M;
      f.seed = config.ensemble.seed;
      f.workers = workers;
      if (!config.criteria.empty()) f.criteria = config.criteria;
      code = finish_study(study_forward_convergence(f), config.out_dir, summary);
      break;
    }
    case Command::StudyMomentUniformity: {
      MomentStudyConfig f;
      f.spec = build_diffusion(config.diffusion);
      f.domain = build_domain(config.domain);
      f.grid = TimeGrid(config.grid.t0, config.grid.T, config.grid.N);
      f.x0 = config.x0;
      if (!config.n_values.empty()) f.n_values = config.n_values;
      if (!config.q_values.empty()) f.q_values = config.q_values;
      f.M = config.ensemble.M;
      f.seed = config.ensemble.seed;
      f.workers = workers;
      if (!config.criteria.empty()) f.criteria = config.criteria;
      code = finish_study(study_moment_uniformity(f), config.out_dir, summary);
      break;
    }
    case Command::StudyFieldConvergence: {
      FieldStudyConfig f;
      f.spec = build_diffusion(config.diffusion);
      f.domain = build_domain(config.domain);
      f.problem = build_problem(config.problem, config.domain);
      f.basis = BasisSpec{config.basis.degree, config.basis.boundary_features};
      f.stepping = build_stepping(config.stepping);
      f.T = config.grid.T;
      f.N = config.grid.N;
      f.M = config.ensemble.M;
      for (const PointConfig& p : config.points) f.points.push_back({p.t, p.x});
      if (!config.n_values.empty()) f.n_values = config.n_values;
      f.oracle = to_oracle(config.oracle);
      f.seed = config.ensemble.seed;
      f.workers = workers;
      if (!config.criteria.empty()) f.criteria = config.criteria;
      code = finish_study(study_field_convergence(f), config.out_dir, summary);
      break;
    }
    case Command::StudyInitialContinuity: {
      ContinuityStudyConfig f;
      f.spec = build_diffusion(config.diffusion);
      f.domain = build_domain(config.domain);
      f.problem = build_problem(config.problem, config.domain);
      f.basis = BasisSpec{config.basis.degree, config.basis.boundary_features};
      f.stepping = build_stepping(config.stepping);
      f.T = config.grid.T;
      f.N = config.grid.N;
      f.M = config.ensemble.M;
      f.t_base = config.continuity.t_base;
      f.x_base = config.continuity.x_base;
      f.j_lo = config.continuity.j_lo;
      f.j_hi = config.continuity.j_hi;
      f.oracle = to_oracle(config.oracle);
      f.seed = config.ensemble.seed;
      f.workers = workers;
      if (!config.criteria.empty()) f.criteria = config.criteria;
      code = finish_study(study_initial_continuity(f), config.out_dir, summary);
      break;
    }
  }

  {
    const std::string path = artifact_path(config.out_dir, "summary.txt");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("run: cannot write " + path);
    out << summary;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::fputs(summary.c_str(), stdout);
  std::printf("wall-clock: %.2f s\n", wall);
  std::fflush(stdout);
  return code;
}

}  // namespace nmc
