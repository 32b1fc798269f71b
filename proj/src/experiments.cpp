#include "nmc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "nmc/csv.hpp"

namespace nmc {

namespace {

// Short form for verdict details; the CSV keeps the full 17 digits.
std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

std::string fmt_n(double n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", n);
  return std::string(buf);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const Vector& v) {
  const Index M = v.size();
  MeanSe r;
  r.mean = v.mean();
  if (M > 1) {
    const double var = (v.array() - r.mean).square().sum() / static_cast<double>(M - 1);
    r.se = std::sqrt(var / static_cast<double>(M));
  }
  return r;
}

bool wants(const std::vector<std::string>& criteria, const std::string& id) {
  return std::find(criteria.begin(), criteria.end(), id) != criteria.end();
}

void check_sweep(const std::vector<double>& n_values) {
  if (n_values.empty()) throw InvalidInput("study: empty n sweep");
  for (size_t i = 0; i < n_values.size(); ++i) {
    if (!(n_values[i] > 0.0)) throw InvalidInput("study: n values must be > 0");
    if (i > 0 && !(n_values[i] > n_values[i - 1]))
      throw InvalidInput("study: n sweep must be strictly increasing");
  }
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Means must drop by more than twice the combined standard error at every
// step, except where both sides already vanish.
Verdict decreasing_verdict(const std::string& id, const std::vector<MeanSe>& seq,
                           const std::vector<double>& n_values) {
  Verdict v;
  v.id = id;
  v.pass = true;
  std::string chain;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) chain += " > ";
    chain += fmt6(seq[i].mean);
  }
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    const double gap = seq[i].mean - seq[i + 1].mean;
    const double noise = 2.0 * std::hypot(seq[i].se, seq[i + 1].se);
    const bool degenerate = seq[i].mean <= 1e-12 && seq[i + 1].mean <= 1e-12;
    if (!degenerate && !(gap > noise)) {
      v.pass = false;
      v.detail = "gap " + fmt6(gap) + " from n=" + fmt_n(n_values[i]) + " to n=" +
                 fmt_n(n_values[i + 1]) + " is not above noise " + fmt6(noise);
      return v;
    }
  }
  v.detail = "means " + chain + " decrease beyond twice the combined stderr";
  return v;
}

Verdict final_half_verdict(const std::string& id, const std::vector<MeanSe>& seq) {
  Verdict v;
  v.id = id;
  const double first = seq.front().mean, last = seq.back().mean;
  v.pass = last <= 0.5 * first + 1e-12;
  v.detail = "final " + fmt6(last) + (v.pass ? " <= " : " > ") + "half of initial " +
             fmt6(first);
  return v;
}

}  // namespace

bool StudyReport::passed() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

const EstimateCell& StudyReport::cell(const std::string& id) const {
  for (const auto& c : cells)
    if (c.id == id) return c;
  throw InvalidInput("StudyReport: no cell named " + id);
}

std::string StudyReport::summary() const {
  std::string s;
  s += "study: " + kind + "\n";
  s += "seed: " + std::to_string(seed) + "\n";
  s += "cells:\n";
  for (const auto& c : cells) {
    s += "  " + c.id + " = " + fmt6(c.value);
    if (c.std_error > 0.0) s += " (se " + fmt6(c.std_error) + ")";
    s += "\n";
  }
  s += "verdicts:\n";
  for (const auto& v : verdicts)
    s += std::string("  [") + (v.pass ? "PASS" : "FAIL") + "] " + v.id + ": " + v.detail +
         "\n";
  s += std::string("result: ") + (passed() ? "PASS" : "FAIL") + "\n";
  return s;
}

void StudyReport::write_csv(const std::string& path) const {
  CsvWriter out(path);
  out.header({"record", "id", "value", "std_error"});
  for (const auto& c : cells) {
    out.begin_row();
    out.cell(std::string("cell"));
    out.cell(c.id);
    out.cell(c.value);
    out.cell(c.std_error);
    out.end_row();
  }
  for (const auto& v : verdicts) {
    out.begin_row();
    out.cell(std::string("verdict"));
    out.cell(v.id);
    out.cell(v.pass ? 1.0 : 0.0);
    out.cell(0.0);
    out.end_row();
  }
  out.close();
}

double ks_one_sample(const Vector& sample, const std::function<double(double)>& cdf) {
  if (sample.size() < 1) throw InvalidInput("ks_one_sample: empty sample");
  std::vector<double> s(sample.data(), sample.data() + sample.size());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    D = std::max(D, std::max(F - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - F));
  }
  return D;
}

double ks_two_sample(const Vector& a, const Vector& b) {
  if (a.size() < 1 || b.size() < 1) throw InvalidInput("ks_two_sample: empty sample");
  std::vector<double> sa(a.data(), a.data() + a.size());
  std::vector<double> sb(b.data(), b.data() + b.size());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  size_t i = 0, j = 0;
  double D = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (i < sa.size() && j < sb.size())
      v = std::min(sa[i], sb[j]);
    else
      v = i < sa.size() ? sa[i] : sb[j];
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return D;
}

double sample_quantile(const Vector& sample, double p) {
  if (sample.size() < 1) throw InvalidInput("sample_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("sample_quantile: p outside [0, 1]");
  std::vector<double> s(sample.data(), sample.data() + sample.size());
  std::sort(s.begin(), s.end());
  const double h = p * static_cast<double>(s.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= s.size()) return s.back();
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * s[lo] + w * s[lo + 1];
}

StudyReport study_forward_convergence(const ForwardStudyConfig& config) {
  Stopwatch clock;
  check_sweep(config.n_values);
  if (config.M < 2) throw InvalidInput("study: M must be >= 2");

  StudyReport report;
  report.kind = "forward-convergence";
  report.seed = config.seed;

  std::vector<MeanSe> mx, mk;
  for (double n : config.n_values) {
    const auto dist = couple_and_compare(config.spec, config.domain, n, config.grid,
                                         config.x0, config.seed, config.M, config.workers);
    const std::string tag = ".n=" + fmt_n(n);
    const auto sx = mean_se(dist.sup_X);
    const auto sk = mean_se(dist.sup_K);
    mx.push_back(sx);
    mk.push_back(sk);
    const std::pair<double, const char*> quantiles[] = {
        {0.25, ".p25"}, {0.5, ".p50"}, {0.9, ".p90"}};
    report.cells.push_back({"sup_x" + tag + ".mean", sx.mean, sx.se});
    for (const auto& [p, name] : quantiles)
      report.cells.push_back({"sup_x" + tag + name, sample_quantile(dist.sup_X, p), 0.0});
    report.cells.push_back({"sup_k" + tag + ".mean", sk.mean, sk.se});
    for (const auto& [p, name] : quantiles)
      report.cells.push_back({"sup_k" + tag + name, sample_quantile(dist.sup_K, p), 0.0});
  }

  if (wants(config.criteria, "sup_x_decreasing"))
    report.verdicts.push_back(decreasing_verdict("sup_x_decreasing", mx, config.n_values));
  if (wants(config.criteria, "sup_x_final_half"))
    report.verdicts.push_back(final_half_verdict("sup_x_final_half", mx));
  if (wants(config.criteria, "sup_k_decreasing"))
    report.verdicts.push_back(decreasing_verdict("sup_k_decreasing", mk, config.n_values));
  if (wants(config.criteria, "sup_k_final_half"))
    report.verdicts.push_back(final_half_verdict("sup_k_final_half", mk));

  report.wall_seconds = clock.seconds();
  return report;
}

StudyReport study_moment_uniformity(const MomentStudyConfig& config) {
  Stopwatch clock;
  check_sweep(config.n_values);
  if (config.M < 2) throw InvalidInput("study: M must be >= 2");
  if (config.q_values.empty()) throw InvalidInput("study: empty q list");
  for (int q : config.q_values)
    if (q != 1 && q != 2) throw InvalidInput("study: q values must lie in {1, 2}");

  StudyReport report;
  report.kind = "moment-uniformity";
  report.seed = config.seed;

  struct Family {
    std::string criterion;
    std::string stem;
    std::vector<std::vector<MeanSe>> by_q;  // [q index][n index]
  };
  std::vector<Family> families = {{"uniform_sup_x", "sup_x", {}},
                                  {"uniform_sup_k", "sup_k", {}},
                                  {"uniform_tv_k", "tv_k", {}}};
  for (auto& f : families) f.by_q.resize(config.q_values.size());

  for (double n : config.n_values) {
    const auto ext =
        simulate_extremes(config.spec, config.domain, Scheme::penalized(n), config.grid,
                          config.x0, config.M, config.seed, config.workers);
    for (size_t qi = 0; qi < config.q_values.size(); ++qi) {
      const int q = config.q_values[qi];
      const Vector px = ext.sup_X.array().pow(2 * q);
      const Vector pk = ext.sup_K.array().pow(2 * q);
      const Vector pt = ext.tv_K.array().pow(q);
      const std::string tag = ".pow=" + std::to_string(q) + ".n=" + fmt_n(n);
      const auto cx = mean_se(px), ck = mean_se(pk), ct = mean_se(pt);
      families[0].by_q[qi].push_back(cx);
      families[1].by_q[qi].push_back(ck);
      families[2].by_q[qi].push_back(ct);
      report.cells.push_back({"sup_x" + tag, cx.mean, cx.se});
      report.cells.push_back({"sup_k" + tag, ck.mean, ck.se});
      report.cells.push_back({"tv_k" + tag, ct.mean, ct.se});
    }
  }

  for (const auto& f : families) {
    if (!wants(config.criteria, f.criterion)) continue;
    Verdict v;
    v.id = f.criterion;
    v.pass = true;
    for (size_t qi = 0; qi < config.q_values.size(); ++qi) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (size_t ni = 0; ni < config.n_values.size(); ++ni) {
        if (config.n_values[ni] < 16.0) continue;  // uniformity is claimed from n = 16 on
        lo = std::min(lo, f.by_q[qi][ni].mean);
        hi = std::max(hi, f.by_q[qi][ni].mean);
      }
      if (!std::isfinite(lo)) continue;  // sweep had no levels >= 16
      const double ratio = hi <= 1e-12 ? 1.0 : hi / lo;
      if (!v.detail.empty()) v.detail += "; ";
      v.detail += "q=" + std::to_string(config.q_values[qi]) + " max/min " + fmt6(ratio);
      if (!(ratio <= 2.0)) v.pass = false;
    }
    v.detail += v.pass ? " within 2" : " exceeds 2";
    report.verdicts.push_back(v);
  }

  report.wall_seconds = clock.seconds();
  return report;
}

namespace {

// Oracle field value at a point, when one is configured.
double oracle_value(const OracleSpec& oracle, const Fd1DField* fd, double t, const Vector& x,
                    double T) {
  switch (oracle.kind) {
    case OracleSpec::Kind::Analytic:
      return analytic_linear_solution(oracle.lambda, oracle.mode, t, x(0), T);
    case OracleSpec::Kind::FiniteDifference:
      return fd->value(t, x(0));
    case OracleSpec::Kind::None:
      break;
  }
  throw InvalidInput("no oracle configured");
}

}  // namespace

StudyReport study_field_convergence(const FieldStudyConfig& config) {
  Stopwatch clock;
  check_sweep(config.n_values);
  if (config.points.empty()) throw InvalidInput("study: no evaluation points");
  if (config.problem.k_dim != 1)
    throw InvalidInput("field study handles scalar problems only");
  for (const auto& pt : config.points)
    if (!(pt.t >= 0.0 && pt.t <= config.T))
      throw InvalidInput("study: point time outside [0, T]");

  StudyReport report;
  report.kind = "field-convergence";
  report.seed = config.seed;

  const bool has_oracle = config.oracle.kind != OracleSpec::Kind::None;
  Fd1DField fd_field;
  if (config.oracle.kind == OracleSpec::Kind::FiniteDifference) {
    if (config.domain.dim() != 1)
      throw InvalidInput("finite-difference oracle requires a 1-D domain");
    const auto box = config.domain.bounding_box(0.0);
    const Pde1DGrid inner(box.first(0), box.second(0), config.oracle.J, 0.0, config.T,
                          config.oracle.N_fd);
    fd_field = fd_solve_neumann(config.problem, config.spec, inner);
  }

  Verdict dec{"mc_gap_decreasing", true, ""}, half{"mc_gap_final_half", true, ""},
      agree{"oracle_agreement", true, ""};

  for (size_t pi = 0; pi < config.points.size(); ++pi) {
    const auto& pt = config.points[pi];
    const std::string stem = "point" + std::to_string(pi);
    const auto ref = evaluate_field(config.spec, config.domain, config.problem, config.basis,
                                    config.stepping, pt.t, pt.x, config.T,
                                    Scheme::reflected(), config.N, config.M, config.seed,
                                    config.workers);
    report.cells.push_back({stem + ".u", ref.value(0), ref.std_error(0)});

    std::vector<MeanSe> gaps;
    for (double n : config.n_values) {
      const auto un = evaluate_field(config.spec, config.domain, config.problem,
                                     config.basis, config.stepping, pt.t, pt.x, config.T,
                                     Scheme::penalized(n), config.N, config.M, config.seed,
                                     config.workers);
      const std::string tag = stem + ".n=" + fmt_n(n);
      report.cells.push_back({tag + ".u", un.value(0), un.std_error(0)});
      MeanSe gap;
      gap.mean = std::abs(un.value(0) - ref.value(0));
      gap.se = std::hypot(un.std_error(0), ref.std_error(0));
      gaps.push_back(gap);
      report.cells.push_back({tag + ".gap", gap.mean, gap.se});
    }

    // nonincreasing within noise at every step
    for (size_t i = 0; i + 1 < gaps.size(); ++i) {
      const double slack = 2.0 * std::hypot(gaps[i].se, gaps[i + 1].se);
      if (!(gaps[i + 1].mean <= gaps[i].mean + slack)) {
        dec.pass = false;
        dec.detail += (dec.detail.empty() ? "" : "; ") + stem + " rises at n=" +
                      fmt_n(config.n_values[i + 1]) + " by " +
                      fmt6(gaps[i + 1].mean - gaps[i].mean);
      }
    }
    // final below half the initial by a clear margin, or already at noise
    {
      const double margin = 0.5 * gaps.front().mean - gaps.back().mean;
      const double noise = 2.0 * std::hypot(gaps.front().se, gaps.back().se);
      const bool at_floor = gaps.back().mean <= 3.0 * gaps.back().se + 1e-12;
      if (!(margin >= noise || at_floor)) {
        half.pass = false;
        half.detail += (half.detail.empty() ? "" : "; ") + stem + " final gap " +
                       fmt6(gaps.back().mean) + " vs half initial " +
                       fmt6(0.5 * gaps.front().mean);
      }
    }

    if (has_oracle) {
      const double ov = oracle_value(config.oracle, &fd_field, pt.t, pt.x, config.T);
      report.cells.push_back({stem + ".oracle", ov, 0.0});
      const double err = std::abs(ref.value(0) - ov);
      const double tol = std::max(0.02, 3.0 * ref.std_error(0));
      if (!(err <= tol)) {
        agree.pass = false;
        agree.detail += (agree.detail.empty() ? "" : "; ") + stem + " off oracle by " +
                        fmt6(err) + " (tol " + fmt6(tol) + ")";
      }
    }
  }

  if (dec.pass) dec.detail = "penalized-to-limit gaps nonincreasing at every point";
  if (half.pass) half.detail = "final gap at most half the initial (or at noise floor)";
  if (agree.pass) agree.detail = "limit field within max(0.02, 3 se) of the oracle everywhere";
  if (wants(config.criteria, dec.id)) report.verdicts.push_back(dec);
  if (wants(config.criteria, half.id)) report.verdicts.push_back(half);
  if (has_oracle && wants(config.criteria, agree.id)) report.verdicts.push_back(agree);

  // Deterministic whole-line sweep against the boundary-condition solve.
  if (config.oracle.kind == OracleSpec::Kind::FiniteDifference &&
      config.oracle.penalized_side) {
    const auto box = config.domain.bounding_box(0.0);
    std::vector<double> fd_gaps;
    for (double n : config.n_values) {
      const auto grid = padded_grid_for(config.domain, config.oracle.J_pen, 0.0, config.T,
                                        config.oracle.N_pen);
      const auto un = fd_solve_penalized(config.problem, config.spec, config.domain, n, grid);
      double gap = 0.0;
      for (Index j = 0; j <= config.oracle.J; ++j) {
        const double x =
            box.first(0) + (box.second(0) - box.first(0)) *
                               (static_cast<double>(j) / static_cast<double>(config.oracle.J));
        gap = std::max(gap, std::abs(un.value(0.0, x) - fd_field.value(0.0, x)));
      }
      fd_gaps.push_back(gap);
      report.cells.push_back({"fd.n=" + fmt_n(n) + ".gap", gap, 0.0});
    }
    if (wants(config.criteria, "fd_gap_decreasing")) {
      Verdict v{"fd_gap_decreasing", true, ""};
      for (size_t i = 0; i + 1 < fd_gaps.size(); ++i)
        if (!(fd_gaps[i + 1] < fd_gaps[i])) {
          v.pass = false;
          v.detail = "gap rises at n=" + fmt_n(config.n_values[i + 1]);
        }
      if (v.pass) v.detail = "whole-line gaps strictly decrease across the sweep";
      report.verdicts.push_back(v);
    }
    if (wants(config.criteria, "fd_gap_final")) {
      Verdict v{"fd_gap_final", true, ""};
      v.pass = fd_gaps.back() <= 0.05;
      v.detail = "final whole-line gap " + fmt6(fd_gaps.back()) +
                 (v.pass ? " <= 0.05" : " > 0.05");
      report.verdicts.push_back(v);
    }
  }

  report.wall_seconds = clock.seconds();
  return report;
}

StudyReport study_initial_continuity(const ContinuityStudyConfig& config) {
  Stopwatch clock;
  if (config.j_lo > config.j_hi || config.j_lo < 0)
    throw InvalidInput("study: needs 0 <= j_lo <= j_hi");
  if (config.problem.k_dim != 1)
    throw InvalidInput("continuity study handles scalar problems only");
  if (!(config.t_base >= 0.0) ||
      !(config.t_base + std::ldexp(1.0, -config.j_lo) <= config.T))
    throw InvalidInput("study: time sequence leaves [0, T]");

  StudyReport report;
  report.kind = "initial-continuity";
  report.seed = config.seed;

  const bool has_oracle = config.oracle.kind != OracleSpec::Kind::None;
  Fd1DField fd_field;
  if (config.oracle.kind == OracleSpec::Kind::FiniteDifference) {
    const auto box = config.domain.bounding_box(0.0);
    const Pde1DGrid inner(box.first(0), box.second(0), config.oracle.J, 0.0, config.T,
                          config.oracle.N_fd);
    fd_field = fd_solve_neumann(config.problem, config.spec, inner);
  }

  const auto base = evaluate_field(config.spec, config.domain, config.problem, config.basis,
                                   config.stepping, config.t_base, config.x_base, config.T,
                                   Scheme::reflected(), config.N, config.M, config.seed,
                                   config.workers);
  report.cells.push_back({"base.u", base.value(0), base.std_error(0)});
  const auto base_terminal = simulate_terminal(
      config.spec, config.domain, Scheme::reflected(), TimeGrid(config.t_base, config.T, config.N),
      config.x_base, config.M, config.seed + 1000003, config.workers);

  Verdict field_v{"field_continuity", true, ""};
  std::vector<double> ks_x, ks_k;
  for (int j = config.j_lo; j <= config.j_hi; ++j) {
    const double off = std::ldexp(1.0, -j);
    const double tj = config.t_base + off;
    Vector xj = config.x_base;
    xj(0) += off;
    const std::string stem = "j=" + std::to_string(j);

    const auto uj = evaluate_field(config.spec, config.domain, config.problem, config.basis,
                                   config.stepping, tj, xj, config.T, Scheme::reflected(),
                                   config.N, config.M, config.seed, config.workers);
    report.cells.push_back({stem + ".u", uj.value(0), uj.std_error(0)});
    const double du = std::abs(uj.value(0) - base.value(0));
    const double se = std::hypot(uj.std_error(0), base.std_error(0));
    report.cells.push_back({stem + ".du", du, se});

    double inc = 0.0;
    if (has_oracle) {
      inc = std::abs(oracle_value(config.oracle, &fd_field, tj, xj, config.T) -
                     oracle_value(config.oracle, &fd_field, config.t_base, config.x_base,
                                  config.T));
      report.cells.push_back({stem + ".oracle_inc", inc, 0.0});
    }
    if (!(du <= inc + 3.0 * se)) {
      field_v.pass = false;
      field_v.detail += (field_v.detail.empty() ? "" : "; ") + stem + " moved " + fmt6(du) +
                        " vs allowance " + fmt6(inc + 3.0 * se);
    }

    const auto term = simulate_terminal(config.spec, config.domain, Scheme::reflected(),
                                        TimeGrid(tj, config.T, config.N), xj, config.M,
                                        config.seed + 1000003 * static_cast<std::uint64_t>(j + 2),
                                        config.workers);
    double dx = 0.0, dk = 0.0;
    for (Index c = 0; c < term.X.cols(); ++c) {
      dx = std::max(dx, ks_two_sample(term.X.col(c), base_terminal.X.col(c)));
      dk = std::max(dk, ks_two_sample(term.K.col(c), base_terminal.K.col(c)));
    }
    ks_x.push_back(dx);
    ks_k.push_back(dk);
    report.cells.push_back({stem + ".ks_x", dx, 0.0});
    report.cells.push_back({stem + ".ks_k", dk, 0.0});
  }
  if (field_v.pass)
    field_v.detail = "field estimates track the limit within the allowed increments";
  if (wants(config.criteria, field_v.id)) report.verdicts.push_back(field_v);

  // Two-sample distances must end at the noise floor (1% critical value) or
  // at least drop by 10% across the sequence.
  const double noise_floor = 1.63 * std::sqrt(2.0 / static_cast<double>(config.M));
  auto ks_verdict = [&](const std::string& id, const std::vector<double>& d) {
    Verdict v{id, true, ""};
    const double bar = std::max(noise_floor, 0.9 * d.front());
    v.pass = d.back() <= bar;
    v.detail = "final distance " + fmt6(d.back()) + (v.pass ? " within " : " above ") +
               fmt6(bar) + " (noise floor " + fmt6(noise_floor) + ")";
    return v;
  };
  if (wants(config.criteria, "ks_x_converges"))
    report.verdicts.push_back(ks_verdict("ks_x_converges", ks_x));
  if (wants(config.criteria, "ks_k_converges"))
    report.verdicts.push_back(ks_verdict("ks_k_converges", ks_k));

  report.wall_seconds = clock.seconds();
  return report;
}

}  // namespace nmc
