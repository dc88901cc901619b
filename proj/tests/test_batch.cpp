#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>

#include "nips/batch.hpp"
#include "nips/errors.hpp"
#include "nips/oracle.hpp"
#include "nips/problems.hpp"
#include "support.hpp"

using namespace nips;
using testing::vec;

namespace {

SmoothOracle half_sq_shift(const Vec& a) {
  return quadratic_oracle(Mat::Identity(a.size(), a.size()), a);
}

bool same_trace(const IterationTrace& a, const IterationTrace& b) {
  if (a.size() != b.size()) return false;
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].k != b[i].k || bits(a[i].eta) != bits(b[i].eta) || bits(a[i].phi) != bits(b[i].phi) ||
        bits(a[i].rho_norm) != bits(b[i].rho_norm) || bits(a[i].err_norm) != bits(b[i].err_norm) ||
        bits(a[i].step_norm) != bits(b[i].step_norm))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("stepsize window") {
  CHECK(stepsize_for(2.0, 0.25, 0) == doctest::Approx(0.675).epsilon(1e-15));
  CHECK(stepsize_for(0.5, 0.1, 0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(stepsize_for(2.0, 0.6, 0), ConfigError);
  CHECK_THROWS_AS(stepsize_for(2.0, 0.0, 0), ConfigError);
  CHECK(stepsize_for(2.0, 0.25, 0, schedule::Constant{0.5}) == 0.5);
  CHECK_THROWS_AS(stepsize_for(2.0, 0.25, 0, schedule::Constant{0.8}), ConfigError);
  CHECK_THROWS_AS(stepsize_for(2.0, 0.25, 0, schedule::Constant{0.2}), ConfigError);
  const auto custom = schedule::Custom{[](std::size_t k, double) { return k % 2 ? 0.3 : 0.7; }};
  CHECK(stepsize_for(2.0, 0.25, 1, custom) == 0.3);
  CHECK_THROWS_AS(stepsize_for(2.0, 0.25, 0, schedule::Custom{}), ConfigError);
  const StepWindow w = stepsize_window(1.0, 0.5);
  CHECK(w.lo == 0.5);
  CHECK(w.hi == 1.0);
}

TEST_CASE("nips_step") {
  const CompositeProblem free(half_sq_shift(Vec::Zero(1)), ProxRegularizer::zero());
  CHECK(nips_step(free, vec({4.0}), 1.0, Vec::Zero(1))[0] == 0.0);
  const CompositeProblem nn(half_sq_shift(Vec::Zero(1)), ProxRegularizer::nonneg());
  CHECK(nips_step(nn, vec({-2.0}), 1.0, Vec::Zero(1))[0] == 0.0);
  const CompositeProblem l1(half_sq_shift(Vec::Zero(1)), ProxRegularizer::l1(1.0));
  const double x1 = nips_step(l1, vec({3.0}), 0.5, Vec::Zero(1))[0];
  CHECK(x1 == 1.0);
  const ProxOracleResult o =
      prox_oracle(ProxRegularizer::l1(1.0), vec({1.5}), 0.5, GridSpec::cube(1, -5, 5, 2001));
  CHECK(std::abs(o.x[0] - 1.0) <= 2 * o.pitch);

  // The error enters with a minus sign on the gradient.
  CHECK(nips_step(free, vec({4.0}), 0.5, vec({1.0}))[0] == 4.0 - 0.5 * (4.0 - 1.0));
  CHECK_THROWS_AS(nips_step(free, vec({4.0}), 0.0, Vec::Zero(1)), InvalidInput);
  CHECK_THROWS_AS(nips_step(free, vec({4.0}), 1.0, Vec::Zero(2)), DimensionMismatch);
}

TEST_CASE("corollary constants and h_lower_bound") {
  CHECK(h_lower_bound(0.0, 0.0, 0.5, 1.0) == 0.0);
  CHECK(h_lower_bound(1.0, 0.0, 0.5, 1.0) == doctest::Approx(0.125 / 3.0).epsilon(1e-14));
  const CorollaryConstants a = corollary_constants(0.5, 1.0);
  CHECK(a.a1 == doctest::Approx(0.125 / 3.0).epsilon(1e-14));
  CHECK(a.a2 == doctest::Approx(13.0 / 6.0).epsilon(1e-14));
  CHECK(a.a3 == doctest::Approx(11.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(h_lower_bound(1.0, 0.0, 1.0, 1.0), ConfigError);

  // Positivity across the admissible range.
  for (double L : {0.1, 1.0, 7.0}) {
    for (double frac : {1e-4, 0.1, 0.5, 0.999}) {
      const CorollaryConstants k = corollary_constants(frac / L, L);
      CHECK(k.a1 > 0.0);
      CHECK(k.a2 > 0.0);
      CHECK(k.a3 > 0.0);
    }
  }
}

TEST_CASE("descent_gap_bound") {
  const Vec x = vec({1.0, 2.0});
  CHECK(descent_gap_bound(x, x, 0.7, 0.3, 1.0) == 0.0);
  CHECK(descent_gap_bound(2.0, 1.0, 0.0, 1.0) == 2.0);
  CHECK(descent_gap_bound(3.0, 2.0 / 5.0, 0.0, 5.0) == 0.0);
}

TEST_CASE("audit_iteration") {
  IterationRecord cur{0, 0.5, 10.0, 1.0, 0.0, 0.4, 0.0};
  IterationRecord next{1, 0.5, 9.0, 0.5, 0.0, 0.1, 0.0};
  AuditResult ok = audit_iteration(cur, next, 1.0, 0.25, 0.0);
  CHECK(ok.passed);
  CHECK(ok.corollary_checked);

  // Step longer than rho + eps is impossible for a true iteration.
  cur.step_norm = 1.5;
  const AuditResult bad = audit_iteration(cur, next, 1.0, 0.25, 0.0);
  CHECK_FALSE(bad.passed);
  CHECK(bad.failure.find("step upper bound") != std::string::npos);

  cur.step_norm = 0.4;
  next.phi = 10.5;
  CHECK_FALSE(audit_iteration(cur, next, 1.0, 0.25, 0.0).passed);

  next.phi = 9.0;
  cur.err_norm = 1.0;  // eta * ||e|| = 0.5 above an error level of 0.1
  CHECK(audit_iteration(cur, next, 1.0, 0.25, 0.1).failure.find("error level") !=
        std::string::npos);
}

TEST_CASE("ErrorSource respects the bound and the seed") {
  const ErrorModel m = ErrorModel::gaussian_clipped(5.0, 0.01, 42);
  ErrorSource a(m, 4);
  ErrorSource b(m, 4);
  for (std::size_t k = 0; k < 100; ++k) {
    const Vec ea = a.next(Vec::Zero(4), Vec::Zero(4), 0.3, k);
    CHECK(0.3 * ea.norm() <= 0.01 * (1 + 1e-14));
    CHECK(ea == b.next(Vec::Zero(4), Vec::Zero(4), 0.3, k));
  }
  ErrorSource f(ErrorModel::fixed_direction(vec({3.0, 4.0}), 2.0, 1.0), 2);
  CHECK((f.next(Vec::Zero(2), Vec::Zero(2), 0.25, 0) - vec({1.2, 1.6})).norm() < 1e-15);
  CHECK_THROWS_AS(ErrorModel::fixed_direction(Vec::Zero(2), 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(ErrorModel::gaussian_clipped(-1.0, 1.0, 0), ConfigError);
  CHECK(ErrorModel::none().is_none());
}

TEST_CASE("solve_batch examples") {
  SUBCASE("shifted quadratic") {
    const CompositeProblem p(half_sq_shift(vec({3.0})), ProxRegularizer::zero());
    SolverConfig cfg;
    cfg.c = 0.25;
    cfg.eta_schedule = schedule::Constant{0.675};
    cfg.max_outer_iters = 100;
    cfg.audit_inequalities = true;
    const BatchResult r = solve_batch(p, vec({0.0}), cfg);
    CHECK(r.status == SolveStatus::converged);
    CHECK(r.final_rho_norm <= 1e-8);
    CHECK(r.iterations <= 100);
    CHECK(std::abs(r.x[0] - 3.0) <= 1e-8);
    for (const auto& a : r.audits) CHECK(a.passed);
  }

  SUBCASE("projected quadratic") {
    const CompositeProblem p(half_sq_shift(vec({-1.0, 2.0})), ProxRegularizer::nonneg());
    const BatchResult r = solve_batch(p, vec({1.0, 1.0}), SolverConfig{});
    CHECK(r.status == SolveStatus::converged);
    CHECK((r.x - vec({0.0, 2.0})).norm() <= 1e-8);
  }

  SUBCASE("nonconvex quartic") {
    // Stationary points of x^4/4 - x^2/2 are -1, 0, 1; from 0.1 the descent path goes to 1.
    const CompositeProblem p(quartic_1d_oracle(), ProxRegularizer::zero());
    SolverConfig cfg;
    cfg.max_outer_iters = 2000;
    cfg.residual_tol = 1e-6;
    cfg.audit_inequalities = true;
    const BatchResult r = solve_batch(p, vec({0.1}), cfg);
    CHECK(r.status == SolveStatus::converged);
    CHECK(std::abs(r.x[0] - 1.0) <= 1e-5);
    const double c = effective_c(cfg, p.smooth().lipschitz);
    for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
      CHECK(r.trace[i + 1].phi <= r.trace[i].phi);
      CHECK(c * r.trace[i].rho_norm <= r.trace[i].step_norm + 1e-15);
    }
  }

  SUBCASE("trace layout and determinism") {
    const CompositeProblem p(half_sq_shift(vec({3.0, -1.0})), ProxRegularizer::l1(0.5));
    SolverConfig cfg;
    cfg.error_model = ErrorModel::gaussian_clipped(1.0, 1e-3, 9);
    cfg.max_outer_iters = 40;
    cfg.record_time = false;
    const BatchResult a = solve_batch(p, Vec::Zero(2), cfg);
    const BatchResult b = solve_batch(p, Vec::Zero(2), cfg);
    CHECK(same_trace(a.trace, b.trace));
    REQUIRE(!a.trace.empty());
    CHECK(a.trace.back().is_terminal());
    for (std::size_t i = 0; i + 1 < a.trace.size(); ++i) {
      CHECK(a.trace[i].k < a.trace[i + 1].k);
      CHECK(std::isfinite(a.trace[i].phi));
    }
    CHECK(a.phi_best <= p.phi(a.x));

    cfg.trace_every = 0;
    CHECK(solve_batch(p, Vec::Zero(2), cfg).trace.size() == 1);
  }

  SUBCASE("rejects bad starting points") {
    const CompositeProblem p(half_sq_shift(vec({3.0})), ProxRegularizer::nonneg());
    CHECK_THROWS_AS(solve_batch(p, vec({-1.0}), SolverConfig{}), InvalidInput);
    CHECK_THROWS_AS(solve_batch(p, vec({NAN}), SolverConfig{}), InvalidInput);
    CHECK_THROWS_AS(solve_batch(p, vec({1.0, 1.0}), SolverConfig{}), DimensionMismatch);
  }

  SUBCASE("understated L trips the audit") {
    Mat Q = Mat::Identity(1, 1) * 10.0;
    SmoothOracle f = quadratic_oracle(Q, Vec::Zero(1));
    f.lipschitz = 1.0;  // true curvature is 10
    const CompositeProblem p(f, ProxRegularizer::zero());
    SolverConfig cfg;
    cfg.audit_inequalities = true;
    const BatchResult r = solve_batch(p, vec({1.0}), cfg);
    CHECK(r.status == SolveStatus::audit_violation);
    REQUIRE(r.violation.has_value());
    CHECK_FALSE(r.violation->passed);
  }
}

TEST_CASE("bounded-error runs satisfy every audit") {
  std::mt19937_64 rng(17);
  const Mat D = Mat::Random(12, 5);
  const Vec y = D * Vec::Ones(5);
  const CompositeProblem p(least_squares_oracle(D, y), ProxRegularizer::l1_nonneg(0.3));
  for (double bound : {1e-3, 1e-2, 1e-1}) {
    SolverConfig cfg;
    cfg.error_model = ErrorModel::gaussian_clipped(1.0, bound, 3);
    cfg.audit_inequalities = true;
    cfg.max_outer_iters = 200;
    const BatchResult r = solve_batch(p, Vec::Zero(5), cfg);
    CHECK(r.status != SolveStatus::audit_violation);
    CHECK(r.audits.size() == 200);
  }
}
