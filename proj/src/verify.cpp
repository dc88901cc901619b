#include "nips/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "nips/batch.hpp"
#include "nips/errors.hpp"
#include "nips/incremental.hpp"
#include "nips/nmf.hpp"
#include "nips/oracle.hpp"
#include "nips/problems.hpp"

namespace nips {

namespace {

using Rng = std::mt19937_64;

Vec uniform_vec(Rng& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string vec_str(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += fmt::format("{}{:.17g}", i ? " " : "", v[i]);
  return s + "]";
}

struct NamedReg {
  std::string label;
  ProxRegularizer g;
};

// Kinds swept by the lemma checks, in dimension n.
std::vector<NamedReg> sweep_kinds(Eigen::Index n, Rng& rng) {
  const Vec a = uniform_vec(rng, n, 0.2, 1.0);
  const Vec lower = Vec::Constant(n, -1.0);
  const Vec upper = Vec::Constant(n, 2.0);
  const Vec inside = uniform_vec(rng, n, -0.5, 1.5);
  return {{"zero", ProxRegularizer::zero()},
          {"l1", ProxRegularizer::l1(0.7)},
          {"indicator_nonneg", ProxRegularizer::nonneg()},
          {"l1_plus_nonneg", ProxRegularizer::l1_nonneg(0.7)},
          {"indicator_box", ProxRegularizer::box(lower, upper)},
          {"indicator_box_hyperplane",
           ProxRegularizer::box_hyperplane(lower, upper, a, a.dot(inside))}};
}

class Suite {
 public:
  Suite(std::string name, std::vector<CheckResult>& out) : name_(std::move(name)), out_(out) {}

  void add(std::string check, bool passed, std::string detail, std::string replay = {}) {
    out_.push_back({name_, std::move(check), passed, std::move(detail),
                    passed ? std::string() : std::move(replay)});
  }

 private:
  std::string name_;
  std::vector<CheckResult>& out_;
};

// ---------------------------------------------------------------------------
// prox

void prox_suite(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  Suite suite("prox", out);
  Rng rng(opts.seed);

  {
    const std::size_t points[] = {0, 2001, 301, 61};  // initial pitch 5e-3, 3.3e-2, 0.17
    double worst = 0.0;
    std::string replay;
    bool ok = true;
    for (int i = 0; i < 50; ++i) {
      const auto d = static_cast<Eigen::Index>(1 + (i / 5) % 3);
      const Vec y = uniform_vec(rng, d, -3.0, 3.0);
      const double eta = uniform(rng, 0.2, 2.0);
      const double w = uniform(rng, 0.1, 1.5);
      const double spread = uniform(rng, 0.0, 1.0);
      ProxRegularizer g;
      switch (i % 5) {
        case 0: g = ProxRegularizer::zero(); break;
        case 1: g = ProxRegularizer::l1(w); break;
        case 2: g = ProxRegularizer::nonneg(); break;
        case 3: g = ProxRegularizer::l1_nonneg(w); break;
        default:
          g = ProxRegularizer::box(Vec::Constant(d, -1.0 - spread), Vec::Constant(d, 0.5 + spread));
      }
      const Vec closed = prox_apply(g, y, eta);
      const ProxOracleResult r =
          prox_oracle(g, y, eta, GridSpec::cube(static_cast<std::size_t>(d), -5.0, 5.0,
                                                points[static_cast<std::size_t>(d)]));
      const double ratio = (closed - r.x).norm() / r.pitch;
      if (ratio > worst) worst = ratio;
      if (ratio > 2.0 && ok) {
        ok = false;
        replay = fmt::format("kind={} y={} eta={:.17g} weight={:.17g}", g.name(), vec_str(y), eta, w);
      }
    }
    suite.add("closed_form_vs_oracle", ok,
              fmt::format("cases=50 max_error_over_pitch={:.3f} limit=2", worst), replay);
  }

  {
    bool ok = true;
    std::string replay;
    double worst2 = 0.0;
    double worst3 = 0.0;
    for (int i = 0; i < 6; ++i) {
      const Eigen::Index n = i < 3 ? 2 : 3;
      const Vec a = uniform_vec(rng, n, 0.3, 1.0);
      const Vec lower = Vec::Constant(n, -1.0);
      const Vec upper = Vec::Constant(n, 1.0);
      const double b = a.dot(uniform_vec(rng, n, -0.8, 0.8));
      const Vec y = uniform_vec(rng, n, -2.0, 2.0);
      const ProxRegularizer g = ProxRegularizer::box_hyperplane(lower, upper, a, b);
      const Vec x = project_box_hyperplane(y, lower, upper, a, b);
      // The search runs over the hyperplane, so only the first n - 1 counts matter.
      GridSpec grid = GridSpec::cube(static_cast<std::size_t>(n), -2.0, 2.0, 3);
      grid.points[0] = n == 2 ? 2001 : 701;
      if (n == 3) grid.points[1] = 701;
      const ProxOracleResult r = prox_oracle(g, y, 1.0, grid);
      const double err = (x - r.x).norm();
      const double limit = n == 2 ? 2.0 * r.pitch : 1e-3;
      if (n == 2) worst2 = std::max(worst2, err / r.pitch);
      else worst3 = std::max(worst3, err);
      if (err > limit && ok) {
        ok = false;
        replay = fmt::format("y={} normal={} offset={:.17g}", vec_str(y), vec_str(a), b);
      }
    }
    suite.add("box_hyperplane_vs_oracle", ok,
              fmt::format("cases=6 n2_error_over_pitch={:.3f} n3_error={:.3e}", worst2, worst3),
              replay);
  }

  {
    bool ok = true;
    std::string replay;
    double worst = 0.0;
    std::size_t sweeps = 0;
    for (int i = 0; i < 100; ++i) {
      const Vec y = uniform_vec(rng, 4, -3.0, 3.0);
      const double tau = uniform(rng, 0.05, 2.0);
      const DykstraResult r = dykstra_prox(
          y, [tau](const Vec& v) { return prox_l1(v, tau); }, project_nonneg);
      const double err = (r.x - prox_l1_nonneg(y, tau)).norm();
      worst = std::max(worst, err);
      sweeps = std::max(sweeps, r.iterations);
      if ((err > 1e-8 || !r.converged) && ok) {
        ok = false;
        replay = fmt::format("y={} tau={:.17g}", vec_str(y), tau);
      }
    }
    suite.add("dykstra_l1_nonneg", ok,
              fmt::format("inputs=100 max_error={:.3e} max_sweeps={}", worst, sweeps), replay);
  }
}

// ---------------------------------------------------------------------------
// lemmas

struct TestProblem {
  std::string label;
  CompositeProblem problem;
  Vec x0;
};

std::vector<TestProblem> test_problems(Rng& rng) {
  std::vector<TestProblem> out;
  {
    const Mat M = uniform_vec(rng, 25, -1.0, 1.0).reshaped(5, 5);
    const Mat Q = M.transpose() * M / 5.0 + 0.5 * Mat::Identity(5, 5);
    out.push_back({"quadratic",
                   CompositeProblem(quadratic_oracle(Q, uniform_vec(rng, 5, -1.0, 1.0)),
                                    ProxRegularizer::zero()),
                   uniform_vec(rng, 5, -2.0, 2.0)});
  }
  {
    const Mat M = uniform_vec(rng, 16, -1.0, 1.0).reshaped(4, 4);
    const Mat Q = 0.5 * (M + M.transpose());
    out.push_back({"constrained_quadratic",
                   CompositeProblem(quadratic_oracle(Q, uniform_vec(rng, 4, -1.0, 1.0)),
                                    ProxRegularizer::box(Vec::Constant(4, -1.0),
                                                         Vec::Constant(4, 1.0))),
                   Vec::Zero(4)});
  }
  {
    const Mat D = uniform_vec(rng, 32, 0.0, 1.0).reshaped(8, 4);
    out.push_back({"lasso_nonneg",
                   CompositeProblem(least_squares_oracle(D, uniform_vec(rng, 8, 0.0, 2.0)),
                                    ProxRegularizer::l1_nonneg(0.1)),
                   Vec::Constant(4, 0.5)});
  }
  out.push_back({"quartic", CompositeProblem(quartic_1d_oracle(2.0, 0), ProxRegularizer::zero()),
                 Vec::Constant(1, 0.1)});
  return out;
}

void lemma_suite(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  Suite suite("lemmas", out);
  Rng rng(opts.seed + 1);

  {
    bool ok = true;
    std::string replay;
    double worst = -1.0;
    std::size_t count = 0;
    for (const NamedReg& k : sweep_kinds(4, rng)) {
      std::vector<std::pair<Vec, Vec>> pairs;
      for (int i = 0; i < 1000; ++i)
        pairs.emplace_back(uniform_vec(rng, 4, -3.0, 3.0), uniform_vec(rng, 4, -3.0, 3.0));
      for (double eta : {1e-2, 1e-1, 1.0, 10.0}) {
        const NonexpansiveReport r = check_nonexpansive(k.g, pairs, eta);
        count += pairs.size();
        worst = std::max(worst, r.max_excess);
        if (!r.passed && ok) {
          ok = false;
          replay = fmt::format("kind={} x={} y={} eta={:g}", k.label,
                               vec_str(pairs[r.worst].first), vec_str(pairs[r.worst].second), eta);
        }
      }
    }
    suite.add("nonexpansive", ok, fmt::format("pairs={} max_excess={:.3e}", count, worst), replay);
  }

  {
    std::vector<double> etas(20);
    for (std::size_t i = 0; i < etas.size(); ++i)
      etas[i] = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 19.0);
    bool ok = true;
    std::string replay;
    double worst = 0.0;
    for (const NamedReg& k : sweep_kinds(4, rng)) {
      for (int i = 0; i < 100; ++i) {
        const Vec y = k.g.prox(uniform_vec(rng, 4, -2.0, 2.0), 1.0);
        const Vec z = uniform_vec(rng, 4, -2.0, 2.0);
        const MonotonicityReport r = check_prox_monotonicity(k.g, y, z, etas);
        worst = std::max({worst, r.p_violation, r.q_violation});
        if (!r.passed(1e-8) && ok) {
          ok = false;
          replay = fmt::format("kind={} y={} z={}", k.label, vec_str(y), vec_str(z));
        }
      }
    }
    suite.add("prox_monotonicity", ok, fmt::format("cases=600 max_violation={:.3e}", worst),
              replay);
  }

  auto problems = test_problems(rng);

  {
    bool ok = true;
    std::string replay;
    std::size_t total = 0;
    auto check_trace = [&](const std::string& label, const IterationTrace& trace) {
      for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        ++total;
        const double slack = 1e-12 * (1.0 + std::abs(trace[i].phi));
        if (trace[i + 1].phi > trace[i].phi + slack && ok) {
          ok = false;
          replay = fmt::format("problem={} k={} phi={:.17g} next={:.17g}", label, trace[i].k,
                               trace[i].phi, trace[i + 1].phi);
        }
      }
    };
    for (const TestProblem& tp : problems) {
      SolverConfig cfg;
      cfg.max_outer_iters = 300;
      cfg.residual_tol = 0.0;
      cfg.record_time = false;
      check_trace(tp.label, solve_batch(tp.problem, tp.x0, cfg).trace);
    }
    {
      NmfProblem p;
      p.Y = Mat(uniform_vec(rng, 48, 0.0, 1.0).reshaped(6, 8));
      p.rank = 2;
      p.minibatch = p.T();
      p.inner.tol = 1e-10;
      IncrementalConfig ic;
      ic.solver.max_outer_iters = 100;
      ic.solver.residual_tol = 0.0;
      ic.solver.record_time = false;
      check_trace("nmf", solve_nmf(p, NmfInit{opts.seed}, ic).outer.trace);
    }
    suite.add("exact_descent", ok, fmt::format("steps={}", total), replay);
  }

  {
    bool ok = true;
    std::string replay;
    std::size_t audited = 0;
    for (const TestProblem& tp : problems) {
      for (double eps : {1e-3, 1e-2, 1e-1}) {
        SolverConfig cfg;
        cfg.max_outer_iters = 200;
        cfg.residual_tol = 0.0;
        cfg.record_time = false;
        cfg.audit_inequalities = true;
        cfg.error_model = ErrorModel::gaussian_clipped(1.0, eps, opts.seed);
        const BatchResult r = solve_batch(tp.problem, tp.x0, cfg);
        for (const AuditResult& a : r.audits) {
          ++audited;
          std::string why = a.failure;
          CorollaryConstants k = a.constants;
          if (opts.fault_a3_sign) k.a3 = -k.a3;
          if (!(k.a1 > 0.0 && k.a2 > 0.0 && k.a3 > 0.0)) why = "corollary constants not positive";
          const double rho = r.trace[a.k].rho_norm;
          const double e = a.scaled_error;
          const double c = effective_c(cfg, tp.problem.smooth().lipschitz);
          if (why.empty() && c * rho >= e &&
              a.decrease < k.a1 * rho * rho - k.a2 * rho * e - k.a3 * e * e - a.slack)
            why = "corollary bound";
          if (!why.empty() && ok) {
            ok = false;
            replay = fmt::format("problem={} eps={:.17g} seed={} k={} failure={} a=({:.17g} "
                                 "{:.17g} {:.17g})",
                                 tp.label, eps, opts.seed, a.k, why, k.a1, k.a2, k.a3);
          }
        }
      }
    }
    suite.add("inexact_audits", ok, fmt::format("audited={}", audited), replay);
  }

  {
    bool ok = true;
    std::string detail;
    std::string replay;
    for (const TestProblem& tp : problems) {
      if (tp.label != "quartic" && tp.label != "constrained_quadratic") continue;
      for (double eps : {1e-2, 0.0}) {
        SolverConfig cfg;
        cfg.max_outer_iters = 500;
        cfg.residual_tol = 0.0;
        cfg.record_time = false;
        if (eps > 0.0) cfg.error_model = ErrorModel::gaussian_clipped(1.0, eps, opts.seed);
        const BatchResult r = solve_batch(tp.problem, tp.x0, cfg);
        double best = INFINITY;
        for (const IterationRecord& rec : r.trace) best = std::min(best, rec.rho_norm);
        const double limit = eps > 0.0 ? 10.0 * eps : 1e-6;
        detail += fmt::format("{}{}@{:g}={:.2e}", detail.empty() ? "" : " ", tp.label, eps, best);
        if (!(best < limit) && ok) {
          ok = false;
          replay = fmt::format("problem={} eps={:.17g} seed={}", tp.label, eps, opts.seed);
        }
      }
    }
    suite.add("residual_trend", ok, detail, replay);
  }
}

// ---------------------------------------------------------------------------
// incremental

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

void incremental_suite(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  Suite suite("incremental", out);
  Rng rng(opts.seed + 2);

  {
    bool ok = true;
    std::string replay;
    std::size_t audited = 0;
    for (std::size_t T : {2, 5, 10}) {
      const Mat D = uniform_vec(rng, static_cast<Eigen::Index>(3 * T), 0.0, 1.0)
                        .reshaped(static_cast<Eigen::Index>(T), 3);
      const Vec y = uniform_vec(rng, static_cast<Eigen::Index>(T), 0.0, 2.0);
      const DecomposableProblem problem(least_squares_rows(D, y), ProxRegularizer::l1(0.1));
      for (MinorOperator op : {MinorOperator::identity, MinorOperator::prox}) {
        IncrementalConfig ic;
        ic.minor = op;
        ic.solver.max_outer_iters = 100;
        ic.solver.residual_tol = 0.0;
        ic.solver.audit_inequalities = true;
        ic.solver.record_time = false;
        const IncrementalResult r = solve_incremental(problem, Vec::Constant(3, 1.0), ic);
        audited += r.audits.size();
        if ((r.violation || r.audits.empty()) && ok) {
          ok = false;
          replay = fmt::format("T={} variant={} k={} failure={}", T, to_string(op),
                               r.violation ? r.violation->k : 0,
                               r.violation ? r.violation->failure : "no audits");
        }
      }
    }
    suite.add("error_bounds", ok, fmt::format("audited={}", audited), replay);
  }

  {
    const Mat M = uniform_vec(rng, 9, -1.0, 1.0).reshaped(3, 3);
    const SmoothOracle f =
        quadratic_oracle(M.transpose() * M + Mat::Identity(3, 3), uniform_vec(rng, 3, -1.0, 1.0));
    const ProxRegularizer g = ProxRegularizer::l1(0.2);
    const Vec x0 = uniform_vec(rng, 3, -1.0, 1.0);
    IncrementalConfig ic;
    ic.solver.max_outer_iters = 50;
    ic.solver.record_time = false;
    const BatchResult b = solve_batch(CompositeProblem(f, g), x0, ic.solver);
    const IncrementalResult r = solve_incremental(DecomposableProblem({f}, g), x0, ic);
    bool ok = b.trace.size() == r.trace.size();
    for (std::size_t i = 0; ok && i < b.trace.size(); ++i) {
      const IterationRecord& p = b.trace[i];
      const IterationRecord& q = r.trace[i];
      ok = p.k == q.k && same_bits(p.eta, q.eta) && same_bits(p.phi, q.phi) &&
           same_bits(p.rho_norm, q.rho_norm) && same_bits(p.err_norm, q.err_norm) &&
           same_bits(p.step_norm, q.step_norm);
    }
    suite.add("single_component_matches_batch", ok, fmt::format("records={}", b.trace.size()),
              fmt::format("x0={}", vec_str(x0)));
  }

  {
    std::vector<Vec> centers;
    for (int t = 1; t <= 5; ++t) centers.push_back(Vec::Constant(1, t));
    const ProxRegularizer g = ProxRegularizer::l1(2.5);
    const DecomposableProblem problem(shifted_quadratics(centers), g);
    const Vec x0 = Vec::Zero(1);
    SolverConfig sc;
    sc.residual_tol = 1e-12;
    sc.max_outer_iters = 1000;
    sc.record_time = false;
    sc.trace_every = 0;
    const BatchResult b = solve_batch(problem.as_composite(), x0, sc);
    IncrementalConfig ic;
    ic.solver = sc;
    ic.solver.c = 1e-4;
    ic.solver.eta_schedule = schedule::Constant{1e-4};
    ic.solver.max_outer_iters = 50000;
    const IncrementalResult r = solve_incremental(problem, x0, ic);
    const double gap = (r.x - b.x).norm();
    suite.add("sum_of_quadratics_matches_batch", gap <= 1e-3,
              fmt::format("batch={:.6f} incremental={:.6f} gap={:.2e}", b.x[0], r.x[0], gap),
              "centers=1..5 weight=2.5 eta=1e-4");
  }
}

// ---------------------------------------------------------------------------
// nmf

double pearson(const Vec& a, const Vec& b) {
  const Vec x = a.array() - a.mean();
  const Vec y = b.array() - b.mean();
  return x.dot(y) / (x.norm() * y.norm());
}

void nmf_suite(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  Suite suite("nmf", out);
  Rng rng(opts.seed + 3);

  {
    InnerSettings tight;
    tight.tol = 1e-13;
    tight.max_iters = 200000;
    const double gamma = 0.05;
    bool ok = true;
    std::string replay;
    double worst = 0.0;
    int found = 0;
    while (found < 20) {
      const Mat X = uniform_vec(rng, 18, 0.1, 1.0).reshaped(6, 3);
      const Vec y = uniform_vec(rng, 6, 0.0, 1.0);
      const SubproblemResult s = subproblem_solve(X, y, gamma, tight);
      // Skip points where an active bound is only weakly active.
      const Vec slope = X.transpose() * (X * s.a - y);
      bool degenerate = s.a.maxCoeff() < 1e-3;
      for (Eigen::Index i = 0; i < s.a.size(); ++i)
        if (s.a[i] < 1e-4 && slope[i] + gamma < 1e-4) degenerate = true;
      if (degenerate) continue;
      ++found;
      const Mat grad = ft_grad(X, y, s.a);
      const Vec fd = finite_diff_grad(
          [&](const Vec& v) { return ft_value(v.reshaped(6, 3), y, gamma, tight); },
          X.reshaped(), 1e-6);
      const double rel = (grad.reshaped() - fd).norm() / grad.norm();
      worst = std::max(worst, rel);
      if (rel > 1e-4 && ok) {
        ok = false;
        replay = fmt::format("X={} y={} gamma=0.05", vec_str(X.reshaped()), vec_str(y));
      }
    }
    suite.add("gradient_formula", ok, fmt::format("points=20 max_rel_error={:.3e}", worst),
              replay);
  }

  IncrementalConfig ic;
  ic.solver.residual_tol = 1e-9;
  ic.solver.record_time = false;
  ic.solver.trace_every = 0;

  {
    const Vec u = uniform_vec(rng, 10, 0.5, 1.5);
    const Vec v = uniform_vec(rng, 12, 0.5, 1.5);
    NmfProblem p;
    p.Y = Mat(u * v.transpose());
    p.rank = 1;
    ic.solver.max_outer_iters = 500;
    const NmfResult r = solve_nmf(p, NmfInit{opts.seed}, ic);
    const double corr = std::min(pearson(r.X.col(0), u), pearson(r.A.row(0).transpose(), v));
    suite.add("rank_one_exact", r.fit <= 1e-3 && corr >= 0.999,
              fmt::format("fit={:.3e} correlation={:.6f}", r.fit, corr),
              fmt::format("u={} v={} seed={}", vec_str(u), vec_str(v), opts.seed));
  }

  {
    const Mat Xp = uniform_vec(rng, 60, 0.0, 1.0).reshaped(20, 3);
    const Mat Ap = uniform_vec(rng, 90, 0.0, 1.0).reshaped(3, 30);
    NmfProblem p;
    p.Y = Mat(Xp * Ap);
    p.rank = 3;
    ic.solver.max_outer_iters = 500;
    const NmfResult r = solve_nmf(p, NmfInit{opts.seed}, ic);
    suite.add("planted_fit", r.fit <= 0.05,
              fmt::format("fit={:.3e} iterations={}", r.fit, r.outer.iterations),
              fmt::format("seed={}", opts.seed));
  }
}

}  // namespace

std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  if (!all && suite != "prox" && suite != "lemmas" && suite != "incremental" && suite != "nmf")
    throw ConfigError("unknown verify suite '" + std::string(suite) + "'");
  if (all || suite == "prox") prox_suite(opts, out);
  if (all || suite == "lemmas") lemma_suite(opts, out);
  if (all || suite == "incremental") incremental_suite(opts, out);
  if (all || suite == "nmf") nmf_suite(opts, out);
  return out;
}

int verify(std::string_view suite, std::ostream& out, const VerifyOptions& opts) {
  const std::vector<CheckResult> results = run_verify(suite, opts);
  std::size_t failed = 0;
  for (const CheckResult& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name << ' ' << r.detail << '\n';
    if (!r.passed) {
      ++failed;
      out << "  replay: " << r.replay << '\n';
    }
  }
  out << fmt::format("{} checks, {} failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace nips
