// End-to-end acceptance gate: one line per criterion, nonzero exit when any
// fails.  Each check is hermetic and uses fixed seeds.
#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nmc/bsde.hpp"
#include "nmc/config.hpp"
#include "nmc/experiments.hpp"
#include "nmc/forward.hpp"
#include "nmc/geometry.hpp"
#include "nmc/oracle.hpp"
#include "nmc/rng.hpp"
#include "nmc/runner.hpp"

using namespace nmc;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kWorkers = 4;

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::string fmtd(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

Vector random_point(std::uint64_t seed, std::uint64_t id, Index d, double span) {
  Vector x(d);
  for (Index j = 0; j < d; ++j)
    x[j] = span * (2.0 * uniform01(seed, id, static_cast<std::uint32_t>(j), 7) - 1.0);
  return x;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Temporarily routes stdout to /dev/null so nested runs keep the one-line-
// per-criterion report readable.
class StdoutSilencer {
 public:
  StdoutSilencer() {
    std::fflush(stdout);
    saved_ = dup(1);
    const int devnull = open("/dev/null", O_WRONLY);
    if (devnull >= 0) {
      dup2(devnull, 1);
      close(devnull);
    }
  }
  ~StdoutSilencer() {
    std::fflush(stdout);
    if (saved_ >= 0) {
      dup2(saved_, 1);
      close(saved_);
    }
  }

 private:
  int saved_ = -1;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome geometry_suite() {
  const auto ball = ConvexDomain::ball(vec2(0.5, -1.0), 2.0);
  const auto ell = ConvexDomain::ellipsoid(vec2(0.1, 0.2), vec2(1.2, 0.6));
  const auto itv = ConvexDomain::interval(-1.0, 3.0);
  double worst_pair = -1e300, worst_norm = 0.0, worst_res = 0.0;
  int domain_id = 0;
  for (const ConvexDomain* G : {&ball, &ell, &itv}) {
    const Index d = G->dim();
    const double span = 4.0;
    for (int i = 0; i < 10000; ++i) {
      const std::uint64_t id = static_cast<std::uint64_t>(10000 * domain_id + i);
      Vector x = G->center() + random_point(811, id, d, span);
      Vector z = G->project(G->center() + random_point(812, id, d, span));
      const Vector delta = penalization_delta(*G, x);
      worst_pair = std::max(worst_pair, (z - x).dot(delta));
      const double dist = G->contains(x) ? 0.0 : (x - G->project(x)).norm();
      worst_norm = std::max(worst_norm, std::abs(delta.norm() - 2.0 * dist));
      const double lambda = std::pow(10.0, 4.0 * uniform01(813, id, 0, 0) - 2.0);
      const Vector v = G->center() + random_point(814, id, d, span);
      const Vector r = resolvent_delta(*G, v, lambda);
      worst_res = std::max(worst_res, (r + 2.0 * lambda * (r - G->project(r)) - v).norm());
    }
    ++domain_id;
  }
  Outcome o;
  o.pass = worst_pair <= 1e-12 && worst_norm <= 1e-9 && worst_res <= 1e-10;
  o.detail = "max pairing " + fmtd(worst_pair) + ", max |delta| mismatch " + fmtd(worst_norm) +
             ", max resolvent residual " + fmtd(worst_res);
  return o;
}

Outcome containment_suite() {
  const auto G = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  const auto spec = DiffusionSpec::brownian(2);
  const TimeGrid grid(0.0, 1.0, 1000);
  const PathEnsemble ens = simulate_ensemble(spec, G, Scheme::reflected(), grid, vec2(0.5, 0.0),
                                             1000, 2024, kWorkers);
  double worst_level = -1e300, worst_mono = 0.0, worst_inside_dk = 0.0;
  for (const ForwardPath& p : ens.paths) {
    for (Index i = 0; i <= grid.N; ++i)
      worst_level = std::max(worst_level, G.level(p.X.row(i).transpose()));
    for (Index i = 0; i < grid.N; ++i) {
      const double dk = p.k(i + 1) - p.k(i);
      worst_mono = std::min(worst_mono, dk);
      const Vector pre = p.X.row(i).transpose() + (p.V.row(i + 1) - p.V.row(i)).transpose();
      if (G.level(pre) <= 0.0) worst_inside_dk = std::max(worst_inside_dk, std::abs(dk));
    }
  }
  Outcome o;
  o.pass = worst_level <= 1e-12 && worst_mono >= 0.0 && worst_inside_dk == 0.0;
  o.detail = "max level " + fmtd(worst_level) + ", min dk " + fmtd(worst_mono) +
             ", interior dk " + fmtd(worst_inside_dk);
  return o;
}

Outcome reflected_bm_law() {
  const auto G = ConvexDomain::interval(-1.0, 1.0);
  const auto spec = DiffusionSpec::brownian(1);
  const TimeGrid grid(0.0, 1.0, 1000);
  const TerminalSample ts =
      simulate_terminal(spec, G, Scheme::reflected(), grid, vec1(0.0), 100000, 77, kWorkers);
  const Vector sample = ts.X.col(0);
  const double ks = ks_one_sample(
      sample, [](double y) { return reflected_bm_cdf(-1.0, 1.0, 0.0, 1.0, y); });
  Outcome o;
  o.pass = ks <= 0.02;
  o.detail = "KS " + fmtd(ks) + " (tol 0.02)";
  return o;
}

Outcome forward_convergence() {
  ForwardStudyConfig cfg;
  cfg.spec = DiffusionSpec::brownian(2);
  cfg.domain = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  cfg.grid = TimeGrid(0.0, 1.0, 512);
  cfg.x0 = vec2(0.5, 0.0);
  cfg.n_values = {4.0, 16.0, 64.0, 256.0};
  cfg.M = 2000;
  cfg.seed = 41;
  cfg.workers = kWorkers;
  const StudyReport report = study_forward_convergence(cfg);
  Outcome o;
  o.pass = report.passed();
  o.detail = "sup_x means " + fmtd(report.cell("sup_x.n=4.mean").value) + " -> " +
             fmtd(report.cell("sup_x.n=256.mean").value) + ", sup_k " +
             fmtd(report.cell("sup_k.n=4.mean").value) + " -> " +
             fmtd(report.cell("sup_k.n=256.mean").value);
  return o;
}

Outcome pathwise_inequality() {
  const auto G = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  const TimeGrid grid(0.0, 1.0, 400);
  double worst_slack = 1e300;
  for (int pair = 0; pair < 100; ++pair) {
    const std::uint64_t id = static_cast<std::uint64_t>(pair);
    const int knots = 8;
    Matrix Va(grid.N + 1, 2), Vb(grid.N + 1, 2);
    Matrix A(knots + 1, 2), B(knots + 1, 2);
    A.row(0).setZero();
    B.row(0).setZero();
    for (int s = 1; s <= knots; ++s)
      for (int j = 0; j < 2; ++j) {
        A(s, j) = 3.0 * (uniform01(900, id, static_cast<std::uint32_t>(s), j) - 0.5);
        B(s, j) = A(s, j) + 0.6 * (uniform01(901, id, static_cast<std::uint32_t>(s), j) - 0.5);
      }
    for (Index i = 0; i <= grid.N; ++i) {
      const double u = static_cast<double>(i) * knots / grid.N;
      const int s = std::min<int>(knots - 1, static_cast<int>(u));
      const double w = u - s;
      Va.row(i) = (1.0 - w) * A.row(s) + w * A.row(s + 1);
      Vb.row(i) = (1.0 - w) * B.row(s) + w * B.row(s + 1);
    }
    for (double n : {16.0, 256.0}) {
      const PenalizedIntegral ra = integrate_penalized_input(G, n, grid, Va);
      const PenalizedIntegral rb = integrate_penalized_input(G, n, grid, Vb);
      double sup_x2 = 0.0, sup_v = 0.0;
      for (Index i = 0; i <= grid.N; ++i) {
        sup_x2 = std::max(sup_x2, (ra.X.row(i) - rb.X.row(i)).squaredNorm());
        sup_v = std::max(sup_v, (Va.row(i) - Vb.row(i)).norm());
      }
      const double bound = sup_v * sup_v + 4.0 * sup_v * (ra.tv + rb.tv);
      worst_slack = std::min(worst_slack, bound - sup_x2);
    }
  }
  Outcome o;
  o.pass = worst_slack >= -1e-8;
  o.detail = "min slack " + fmtd(worst_slack) + " over 100 input pairs, n in {16, 256}";
  return o;
}

Outcome moment_uniformity() {
  MomentStudyConfig cfg;
  // scale chosen so the overshoot halo at n = 16 is already in the uniform
  // regime relative to the domain size
  cfg.spec = DiffusionSpec::brownian(2, 0.5);
  cfg.domain = ConvexDomain::ball(vec2(0.0, 0.0), 1.0);
  cfg.grid = TimeGrid(0.0, 1.0, 256);
  cfg.x0 = vec2(0.5, 0.0);
  cfg.n_values = {16.0, 64.0, 256.0, 1024.0};
  cfg.q_values = {1, 2};
  cfg.M = 10000;
  cfg.seed = 55;
  cfg.workers = kWorkers;
  const StudyReport report = study_moment_uniformity(cfg);
  Outcome o;
  o.pass = report.passed();
  std::string worst;
  for (const Verdict& v : report.verdicts)
    if (!v.pass) worst += (worst.empty() ? "" : "; ") + v.detail;
  o.detail = worst.empty() ? "max/min ratios within 2 across n >= 16 for q in {1, 2}" : worst;
  return o;
}

Outcome linear_field_oracle() {
  const auto G = ConvexDomain::interval(-1.0, 1.0);
  const auto spec = DiffusionSpec::brownian(1);
  const auto problem = eigenfunction_problem(0.3, 1, -1.0, 1.0);
  const FieldEstimate e =
      evaluate_field(spec, G, problem, BasisSpec{3, true}, Stepping::explicit_step(), 0.0,
                     vec1(-0.5), 1.0, Scheme::reflected(), 400, 200000, 4242, kWorkers);
  const double exact = std::exp(-(0.3 + kPi * kPi / 8.0)) * std::cos(kPi / 4.0);
  const double err = std::abs(e.value(0) - exact);
  // agreement floor as in the boundary-oracle check: the projection step has
  // an intrinsic half-order weak error (~0.009 at this step count), well past
  // 3 se at this path count but far inside the floor
  const double tol = std::max(0.02, 3.0 * e.std_error(0));
  Outcome o;
  o.pass = err <= tol && e.std_error(0) <= 0.01;
  o.detail = "u " + fmtd(e.value(0)) + ", exact " + fmtd(exact) + ", err " + fmtd(err) +
             " (tol " + fmtd(tol) + "), se " + fmtd(e.std_error(0));
  return o;
}

Outcome nonlinear_boundary_oracle() {
  const auto G = ConvexDomain::interval(-1.0, 1.0);
  const auto spec = DiffusionSpec::brownian(1);
  const auto problem = robin_problem(1.0);
  const Pde1DGrid fd_grid(-1.0, 1.0, 800, 0.0, 1.0, 1600);
  const Fd1DField fd = fd_solve_neumann(problem, spec, fd_grid);
  double worst_err = 0.0, worst_tol = 1e300;
  bool pass = true;
  for (double x : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
    const FieldEstimate e =
        evaluate_field(spec, G, problem, BasisSpec{3, true}, Stepping::picard(3), 0.0, vec1(x),
                       1.0, Scheme::reflected(), 800, 20000, 4343, kWorkers);
    const double err = std::abs(e.value(0) - fd.value(0.0, x));
    const double tol = std::max(0.02, 3.0 * e.std_error(0));
    if (err > worst_err) {
      worst_err = err;
      worst_tol = tol;
    }
    pass = pass && err <= tol;
  }
  Outcome o;
  o.pass = pass;
  o.detail = "worst |u_mc - u_fd| " + fmtd(worst_err) + " (tol " + fmtd(worst_tol) +
             ") over five points";
  return o;
}

Outcome field_convergence() {
  FieldStudyConfig cfg;
  cfg.spec = DiffusionSpec::brownian(1);
  cfg.domain = ConvexDomain::interval(-1.0, 1.0);
  cfg.problem = robin_problem(1.0);
  cfg.stepping = Stepping::picard(3);
  cfg.N = 200;
  cfg.M = 10000;
  for (double x : {-0.8, -0.4, 0.0, 0.4, 0.8}) cfg.points.push_back({0.0, vec1(x)});
  cfg.n_values = {4.0, 16.0, 64.0, 256.0};
  cfg.oracle.kind = OracleSpec::Kind::FiniteDifference;
  cfg.oracle.J = 800;
  cfg.oracle.N_fd = 1600;
  cfg.oracle.J_pen = 800;
  cfg.oracle.N_pen = 2048;
  cfg.oracle.penalized_side = true;
  cfg.seed = 97;
  cfg.workers = kWorkers;
  // penalized-to-reflected gaps on both the MC and FD sides; point agreement
  // with the oracle is the previous criterion's job
  cfg.criteria = {"mc_gap_decreasing", "mc_gap_final_half", "fd_gap_decreasing", "fd_gap_final"};
  const StudyReport report = study_field_convergence(cfg);
  Outcome o;
  o.pass = report.passed();
  o.detail = "fd gaps " + fmtd(report.cell("fd.n=4.gap").value) + " -> " +
             fmtd(report.cell("fd.n=256.gap").value) + " (final tol 0.05)";
  if (!o.pass) {
    for (const Verdict& v : report.verdicts)
      if (!v.pass) o.detail += "; " + v.id + ": " + v.detail;
  }
  return o;
}

Outcome bsde_structural() {
  const auto G = ConvexDomain::interval(-1.0, 1.0);
  const auto spec = DiffusionSpec::brownian(1);
  const BasisSpec basis{3, true};

  // terminal consistency, bit for bit
  const TimeGrid grid(0.0, 1.0, 32);
  const BsdePathData paths =
      simulate_for_bsde(spec, G, Scheme::reflected(), grid, vec1(-0.25), 2000, 60, kWorkers, true);
  Vector g_poly(3);
  g_poly << 0.0, 1.0, 2.0;
  const auto poly =
      polynomial_problem(g_poly, Vector::Zero(1), 0.0, Vector::Zero(1), 0.0);
  const BsdeSolution sol = solve_bsde(paths, G, poly, basis, Stepping::explicit_step(), kWorkers);
  bool terminal_exact = true;
  Vector gv(1);
  for (Index p = 0; p < paths.paths(); ++p) {
    poly.g(paths.node(grid.N).row(p).transpose(), gv);
    terminal_exact = terminal_exact && sol.node(grid.N)(p, 0) == gv(0);
  }

  // a unit source integrates to the remaining horizon
  const TimeGrid grid2(0.25, 1.0, 32);
  const BsdePathData paths2 = simulate_for_bsde(spec, G, Scheme::reflected(), grid2, vec1(-0.25),
                                                2000, 61, kWorkers, true);
  const auto unit = constant_driver_problem(Vector::Ones(1), Vector::Zero(1), Vector::Zero(1));
  const BsdeSolution sol2 =
      solve_bsde(paths2, G, unit, basis, Stepping::explicit_step(), kWorkers);
  double worst_clock = 0.0;
  for (Index i = 0; i <= grid2.N; ++i) {
    const double expect = grid2.T - grid2.time(i);
    worst_clock =
        std::max(worst_clock, (sol2.node(i).array() - expect).abs().maxCoeff());
  }

  // regression residuals orthogonal to the basis
  const BsdePathData paths3 = simulate_for_bsde(spec, G, Scheme::reflected(), grid, vec1(-0.25),
                                                4000, 62, kWorkers, true);
  const BsdeSolution sol3 =
      solve_bsde(paths3, G, robin_problem(1.0), basis, Stepping::picard(3), kWorkers);
  const MartingaleReport mart = martingale_residual_report(sol3, paths3, G, basis);
  const double ortho = std::max(sol3.step_orthogonality.maxCoeff(), mart.max_orthogonality);

  Outcome o;
  o.pass = terminal_exact && worst_clock <= 1e-10 && ortho <= 1e-8;
  o.detail = std::string("terminal ") + (terminal_exact ? "exact" : "NOT exact") +
             ", unit-source error " + fmtd(worst_clock) + ", orthogonality " + fmtd(ortho);
  return o;
}

Outcome reproducibility() {
  namespace fs = std::filesystem;
  const std::string base = "acceptance_out";
  fs::remove_all(base);
  const char* study_text = R"({
    "command": "study-forward-convergence",
    "domain": {"kind": "ball", "center": [0, 0], "radius": 1},
    "diffusion": {"kind": "brownian", "dim": 2},
    "grid": {"T": 1, "N": 200},
    "ensemble": {"M": 500, "seed": 17},
    "sweep": {"n": [4, 16, 64, 256]},
    "x0": [0.5, 0]
  })";
  const char* sim_text = R"({
    "command": "simulate-forward",
    "domain": {"kind": "ball", "center": [0, 0], "radius": 1},
    "diffusion": {"kind": "brownian", "dim": 2},
    "grid": {"T": 1, "N": 100},
    "ensemble": {"M": 200, "seed": 18},
    "scheme": "penalized",
    "n": 64,
    "x0": [0.5, 0]
  })";
  bool pass = true;
  std::string detail;
  {
    StdoutSilencer quiet;
    for (const auto& [name, text, artifact] :
         {std::tuple<const char*, const char*, const char*>{"study", study_text, "study.csv"},
          {"sim", sim_text, "paths.csv"}}) {
      for (int w : {1, 4}) {
        RunConfig cfg = parse_config(text);
        cfg.workers = w;
        cfg.out_dir = base + "/" + name + "_w" + std::to_string(w);
        if (run(cfg) != 0) pass = false;
      }
      const std::string a = slurp(base + "/" + name + "_w1/" + artifact);
      const std::string b = slurp(base + "/" + name + "_w4/" + artifact);
      const std::string sa = slurp(base + "/" + name + "_w1/summary.txt");
      const std::string sb = slurp(base + "/" + name + "_w4/summary.txt");
      const bool same = !a.empty() && a == b && !sa.empty() && sa == sb;
      pass = pass && same;
      detail += std::string(detail.empty() ? "" : ", ") + name + " " +
                (same ? "byte-identical" : "DIFFERS") + " across workers {1, 4}";
    }
  }
  fs::remove_all(base);
  Outcome o;
  o.pass = pass;
  o.detail = detail;
  return o;
}

Outcome initial_continuity() {
  ContinuityStudyConfig cfg;
  cfg.spec = DiffusionSpec::brownian(1);
  cfg.domain = ConvexDomain::interval(-1.0, 1.0);
  cfg.problem = eigenfunction_problem(0.3, 1, -1.0, 1.0);
  cfg.stepping = Stepping::explicit_step();
  cfg.N = 100;
  cfg.M = 10000;
  cfg.t_base = 0.0;
  cfg.x_base = vec1(-0.5);
  cfg.j_lo = 4;
  cfg.j_hi = 6;
  cfg.oracle.kind = OracleSpec::Kind::Analytic;
  cfg.oracle.lambda = 0.3;
  cfg.oracle.mode = 1;
  cfg.seed = 31;
  cfg.workers = kWorkers;
  cfg.criteria = {"field_continuity"};
  const StudyReport report = study_initial_continuity(cfg);
  Outcome o;
  o.pass = report.passed();
  o.detail = "du " + fmtd(report.cell("j=4.du").value) + " -> " +
             fmtd(report.cell("j=6.du").value) + " vs oracle increments " +
             fmtd(report.cell("j=4.oracle_inc").value) + " -> " +
             fmtd(report.cell("j=6.oracle_inc").value);
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const Entry entries[] = {
      {1, "geometry suite", 5.0, geometry_suite},
      {2, "reflected containment", 10.0, containment_suite},
      {3, "reflected brownian law", 120.0, reflected_bm_law},
      {4, "forward convergence", 180.0, forward_convergence},
      {5, "pathwise inequality", 10.0, pathwise_inequality},
      {6, "moment uniformity", 120.0, moment_uniformity},
      {7, "linear field oracle", 120.0, linear_field_oracle},
      {8, "nonlinear boundary oracle", 180.0, nonlinear_boundary_oracle},
      {9, "field convergence", 300.0, field_convergence},
      {10, "bsde structural suite", 30.0, bsde_structural},
      {11, "reproducibility", 600.0, reproducibility},
      {12, "initial-data continuity", 180.0, initial_continuity},
  };
  bool all = true;
  for (const Entry& e : entries) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs < e.budget_s;
    const bool pass = o.pass && in_budget;
    all = all && pass;
    std::printf("criterion %2d: %s — %s (%.1f s%s)%s%s\n", e.id, pass ? "PASS" : "FAIL", e.name,
                secs, in_budget ? "" : ", OVER BUDGET", o.detail.empty() ? "" : "; ",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
