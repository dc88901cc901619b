#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "nips/linalg.hpp"
#include "nips/model.hpp"

namespace nips {

// ---------------------------------------------------------------------------
// Gradient error injection

namespace errors {
struct None {};
/// e ~ N(0, sigma^2 I), rescaled so that eta*||e|| <= bound.
struct GaussianClipped {
  double sigma;
};
struct FixedDirection {
  Vec direction;
  double magnitude;
};
struct Adversarial {
  std::function<Vec(const Vec& x, const Vec& grad, double eta, std::size_t k)> fn;
};
}  // namespace errors

/// Perturbation e(x) added to the gradient step. Every emitted error obeys
/// eta * ||e|| <= bound for the stepsize in use.
struct ErrorModel {
  std::variant<errors::None, errors::GaussianClipped, errors::FixedDirection,
               errors::Adversarial>
      kind = errors::None{};
  double bound = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  static ErrorModel none() { return {}; }
  static ErrorModel gaussian_clipped(double sigma, double bound, std::uint64_t seed);
  static ErrorModel fixed_direction(Vec direction, double magnitude, double bound);
  static ErrorModel adversarial(
      std::function<Vec(const Vec&, const Vec&, double, std::size_t)> fn, double bound);

  bool is_none() const noexcept { return std::holds_alternative<errors::None>(kind); }
};

/// Per-solve error generator. Two sources built from equal models emit
/// identical sequences.
class ErrorSource {
 public:
  ErrorSource(const ErrorModel& model, std::size_t dim);
  Vec next(const Vec& x, const Vec& grad, double eta, std::size_t k);

 private:
  ErrorModel model_;
  std::size_t dim_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Stepsizes

namespace schedule {
/// max(c, 0.9 * min(1, 2/L - c)).
struct Auto {};
struct Constant {
  double eta;
};
struct Custom {
  std::function<double(std::size_t k, double L)> fn;
};
}  // namespace schedule

using EtaSchedule = std::variant<schedule::Auto, schedule::Constant, schedule::Custom>;

struct StepWindow {
  double lo;
  double hi;
};

/// [c, min(1, 2/L - c)]; throws ConfigError unless 0 < c < 1/L.
StepWindow stepsize_window(double L, double c);

/// eta_k for the given schedule, guaranteed to lie in stepsize_window(L, c).
double stepsize_for(double L, double c, std::size_t k,
                    const EtaSchedule& schedule = schedule::Auto{});

// ---------------------------------------------------------------------------
// Trace

struct IterationRecord {
  std::size_t k = 0;
  double eta = 0.0;
  double phi = 0.0;
  double rho_norm = 0.0;
  double err_norm = 0.0;
  double step_norm = 0.0;
  double wall_ms = 0.0;

  /// The last record of a solve describes x_final; no step was taken from it
  /// and eta, err_norm and step_norm are NaN.
  bool is_terminal() const noexcept { return step_norm != step_norm; }
};

using IterationTrace = std::vector<IterationRecord>;

enum class SolveStatus { converged, max_iters, audit_violation };

const char* to_string(SolveStatus s) noexcept;

// ---------------------------------------------------------------------------
// Configuration

struct SolverConfig {
  /// Lower stepsize constant, 0 < c < 1/L. Zero selects default_c(L).
  double c = 0.0;
  EtaSchedule eta_schedule = schedule::Auto{};
  std::size_t max_outer_iters = 1000;
  double residual_tol = 1e-8;
  ErrorModel error_model;
  /// Emit every n-th record (0: only the terminal record).
  std::size_t trace_every = 1;
  bool audit_inequalities = false;
  /// Refresh L from SmoothOracle::local_lipschitz at every outer iteration;
  /// c is then capped at 1/(2 L_k).
  bool adaptive_lipschitz = false;
  /// When false, wall_ms is recorded as 0 so traces are byte-reproducible.
  bool record_time = true;
  std::function<void(const IterationRecord&)> on_record;
};

/// Auto lower constant min(0.1 / L, 0.5); the cap keeps the window nonempty for L < 0.1.
double default_c(double L);

/// c actually used for a given L.
double effective_c(const SolverConfig& config, double L);

// ---------------------------------------------------------------------------
// Inequality audits

struct CorollaryConstants {
  double a1, a2, a3;
};

/// a1 = L^2 c^3 / (2(2 - Lc)), a2 = L^2 c^2 / (2 - cL) + 1/c,
/// a3 = 1/c - L^2 c / (2(2 - cL)). Throws ConfigError unless 0 < c < 1/L.
CorollaryConstants corollary_constants(double c, double L);

/// a1 rho^2 - a2 rho eps - a3 eps^2, a lower bound on Phi(x^k) - Phi(x^{k+1}).
/// Throws NumericalError if any of a1, a2, a3 is not positive.
double h_lower_bound(double rho_norm, double eps, double c, double L);

/// ((2 - L eta) / (2 eta)) ||dx||^2 - (eps / eta) ||dx||.
double descent_gap_bound(const Vec& x, const Vec& x_next, double eta, double eps, double L);
double descent_gap_bound(double step_norm, double eta, double eps, double L);

struct AuditResult {
  bool passed = true;
  std::size_t k = 0;
  double slack = 0.0;
  // Phi(x^k) - Phi(x^{k+1}) against its lower bound.
  double decrease = 0.0;
  double descent_bound = 0.0;
  // c||rho|| - eps <= ||dx|| <= ||rho|| + eps.
  double step = 0.0;
  double step_lower = 0.0;
  double step_upper = 0.0;
  // eta ||e|| against the error level.
  double scaled_error = 0.0;
  double error_bound = 0.0;
  // Corollary bound; only asserted when c||rho|| >= eps.
  bool corollary_checked = false;
  double corollary_bound = 0.0;
  CorollaryConstants constants{};
  std::string failure;
};

/// Audits one accepted step from `current` (x^k) to `next` (x^{k+1}); eps is
/// taken as current.eta * current.err_norm.
AuditResult audit_iteration(const IterationRecord& current, const IterationRecord& next,
                            double L, double c, double error_bound);
AuditResult audit_iteration(const CompositeProblem& problem, const IterationRecord& current,
                            const IterationRecord& next, const SolverConfig& config);

// ---------------------------------------------------------------------------
// Solver

/// prox_eta(x - eta (grad f(x) - e)).
Vec nips_step(const CompositeProblem& problem, const Vec& x, double eta, const Vec& e);

struct BatchResult {
  Vec x;
  /// Iterate with the lowest Phi seen; below the error level the last
  /// iterate can wander.
  Vec x_best;
  double phi_best = 0.0;
  double final_rho_norm = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::max_iters;
  IterationTrace trace;
  std::vector<AuditResult> audits;
  std::optional<AuditResult> violation;
};

BatchResult solve_batch(const CompositeProblem& problem, const Vec& x0,
                        const SolverConfig& config);

}  // namespace nips
