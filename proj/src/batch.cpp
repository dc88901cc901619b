#include "nips/batch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "nips/errors.hpp"

namespace nips {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec clip_error(Vec e, double eta, double bound) {
  const double scaled = eta * e.norm();
  if (scaled > bound && scaled > 0.0) e *= bound / scaled;
  return e;
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  double ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }

 private:
  using Clock = std::chrono::steady_clock;
  bool enabled_;
  Clock::time_point start_;
};

}  // namespace

ErrorModel ErrorModel::gaussian_clipped(double sigma, double bound, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !(bound >= 0.0)) throw ConfigError("error model needs sigma, bound >= 0");
  ErrorModel m;
  m.kind = errors::GaussianClipped{sigma};
  m.bound = bound;
  m.seed = seed;
  return m;
}

ErrorModel ErrorModel::fixed_direction(Vec direction, double magnitude, double bound) {
  if (direction.norm() == 0.0) throw ConfigError("fixed error direction must be nonzero");
  ErrorModel m;
  m.kind = errors::FixedDirection{std::move(direction), magnitude};
  m.bound = bound;
  return m;
}

ErrorModel ErrorModel::adversarial(
    std::function<Vec(const Vec&, const Vec&, double, std::size_t)> fn, double bound) {
  if (!fn) throw ConfigError("adversarial error model needs a callback");
  ErrorModel m;
  m.kind = errors::Adversarial{std::move(fn)};
  m.bound = bound;
  return m;
}

ErrorSource::ErrorSource(const ErrorModel& model, std::size_t dim)
    : model_(model), dim_(dim), rng_(model.seed) {}

Vec ErrorSource::next(const Vec& x, const Vec& grad, double eta, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(dim_);
  Vec e = Vec::Zero(n);
  if (const auto* g = std::get_if<errors::GaussianClipped>(&model_.kind)) {
    std::normal_distribution<double> normal(0.0, g->sigma);
    for (Eigen::Index i = 0; i < n; ++i) e[i] = normal(rng_);
  } else if (const auto* f = std::get_if<errors::FixedDirection>(&model_.kind)) {
    if (f->direction.size() != n) throw DimensionMismatch("error direction size");
    e = f->magnitude * f->direction.normalized();
  } else if (const auto* a = std::get_if<errors::Adversarial>(&model_.kind)) {
    e = a->fn(x, grad, eta, k);
    if (e.size() != n) throw DimensionMismatch("adversarial error size");
  }
  return clip_error(std::move(e), eta, model_.bound);
}

StepWindow stepsize_window(double L, double c) {
  if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("Lipschitz constant must be positive");
  if (!(c > 0.0) || !(c < 1.0 / L))
    throw ConfigError("stepsize constant c must satisfy 0 < c < 1/L (c=" + std::to_string(c) +
                      ", 1/L=" + std::to_string(1.0 / L) + ")");
  return {c, std::min(1.0, 2.0 / L - c)};
}

double stepsize_for(double L, double c, std::size_t k, const EtaSchedule& schedule) {
  const StepWindow w = stepsize_window(L, c);
  double eta = 0.0;
  if (std::holds_alternative<schedule::Auto>(schedule)) {
    eta = std::max(c, 0.9 * w.hi);
  } else if (const auto* s = std::get_if<schedule::Constant>(&schedule)) {
    eta = s->eta;
  } else {
    const auto& custom = std::get<schedule::Custom>(schedule);
    if (!custom.fn) throw ConfigError("custom stepsize schedule has no handle");
    eta = custom.fn(k, L);
  }
  if (!(eta >= w.lo && eta <= w.hi))
    throw ConfigError("stepsize " + std::to_string(eta) + " outside window [" +
                      std::to_string(w.lo) + ", " + std::to_string(w.hi) + "]");
  return eta;
}

const char* to_string(SolveStatus s) noexcept {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iters:
      return "max_iters";
    case SolveStatus::audit_violation:
      return "audit_violation";
  }
  return "unknown";
}

double default_c(double L) { return std::min(0.1 / L, 0.5); }

double effective_c(const SolverConfig& config, double L) {
  double c = config.c > 0.0 ? config.c : default_c(L);
  if (config.adaptive_lipschitz) c = std::min(c, 0.5 / L);
  return c;
}

CorollaryConstants corollary_constants(double c, double L) {
  stepsize_window(L, c);
  const double d = 2.0 - L * c;
  return {L * L * c * c * c / (2.0 * d), L * L * c * c / d + 1.0 / c,
          1.0 / c - L * L * c / (2.0 * d)};
}

double h_lower_bound(double rho_norm, double eps, double c, double L) {
  const CorollaryConstants a = corollary_constants(c, L);
  if (!(a.a1 > 0.0 && a.a2 > 0.0 && a.a3 > 0.0))
    throw NumericalError("corollary constants are not all positive", std::min({a.a1, a.a2, a.a3}));
  return a.a1 * rho_norm * rho_norm - a.a2 * rho_norm * eps - a.a3 * eps * eps;
}

double descent_gap_bound(double step_norm, double eta, double eps, double L) {
  return (2.0 - L * eta) / (2.0 * eta) * step_norm * step_norm - eps / eta * step_norm;
}

double descent_gap_bound(const Vec& x, const Vec& x_next, double eta, double eps, double L) {
  return descent_gap_bound((x_next - x).norm(), eta, eps, L);
}

AuditResult audit_iteration(const IterationRecord& current, const IterationRecord& next,
                            double L, double c, double error_bound) {
  AuditResult r;
  r.k = current.k;
  r.slack = 1e-7 * (1.0 + std::abs(current.phi));
  const double eta = current.eta;
  const double eps = eta * current.err_norm;
  const double rho = current.rho_norm;

  r.decrease = current.phi - next.phi;
  r.descent_bound = descent_gap_bound(current.step_norm, eta, eps, L);
  r.step = current.step_norm;
  r.step_lower = c * rho - eps;
  r.step_upper = rho + eps;
  r.scaled_error = eps;
  r.error_bound = error_bound;
  r.constants = corollary_constants(c, L);

  auto fail = [&r](const char* what) {
    r.passed = false;
    if (!r.failure.empty()) r.failure += "; ";
    r.failure += what;
  };
  if (!(r.decrease >= r.descent_bound - r.slack)) fail("descent gap");
  if (!(r.step >= r.step_lower - r.slack)) fail("step lower bound");
  if (!(r.step <= r.step_upper + r.slack)) fail("step upper bound");
  if (!(r.scaled_error <= error_bound + 1e-12 * (1.0 + error_bound))) fail("error level");
  if (!(r.constants.a1 > 0.0 && r.constants.a2 > 0.0 && r.constants.a3 > 0.0))
    fail("corollary constants");
  if (c * rho >= eps) {
    r.corollary_checked = true;
    r.corollary_bound = r.constants.a1 * rho * rho - r.constants.a2 * rho * eps -
                        r.constants.a3 * eps * eps;
    if (!(r.decrease >= r.corollary_bound - r.slack)) fail("corollary bound");
  }
  return r;
}

AuditResult audit_iteration(const CompositeProblem& problem, const IterationRecord& current,
                            const IterationRecord& next, const SolverConfig& config) {
  const double L = problem.smooth().lipschitz;
  return audit_iteration(current, next, L, effective_c(config, L), config.error_model.bound);
}

Vec nips_step(const CompositeProblem& problem, const Vec& x, double eta, const Vec& e) {
  if (!(eta > 0.0)) throw InvalidInput("nips_step: eta must be > 0");
  const Vec grad = problem.smooth().gradient(x);
  if (e.size() != grad.size()) throw DimensionMismatch("nips_step: error vector size");
  return problem.reg().prox(x - eta * (grad - e), eta);
}

BatchResult solve_batch(const CompositeProblem& problem, const Vec& x0,
                        const SolverConfig& config) {
  if (!x0.allFinite()) throw InvalidInput("solve_batch: x0 is not finite");
  if (static_cast<std::size_t>(x0.size()) != problem.dim())
    throw DimensionMismatch("solve_batch: x0 has the wrong dimension");
  double phi = problem.phi(x0);
  if (!std::isfinite(phi)) throw InvalidInput("solve_batch: Phi(x0) is not finite");
  if (config.adaptive_lipschitz && !problem.smooth().local_lipschitz)
    throw ConfigError("adaptive Lipschitz requested but the oracle has no local estimate");

  const SmoothOracle& f = problem.smooth();
  const ProxRegularizer& g = problem.reg();
  ErrorSource errors(config.error_model, problem.dim());
  const Stopwatch clock(config.record_time);

  BatchResult out;
  out.x_best = x0;
  out.phi_best = phi;
  auto emit = [&](const IterationRecord& rec) {
    out.trace.push_back(rec);
    if (config.on_record) config.on_record(rec);
  };

  Vec x = x0;
  for (std::size_t k = 0;; ++k) {
    const Vec grad = f.gradient(x);
    const double L = config.adaptive_lipschitz ? f.local_lipschitz(x) : f.lipschitz;
    const double c = effective_c(config, L);
    const double rho_norm = residual_from_gradient(g, x, grad).norm();
    if (phi < out.phi_best) {
      out.phi_best = phi;
      out.x_best = x;
    }

    const bool converged = rho_norm <= config.residual_tol;
    if (converged || k >= config.max_outer_iters) {
      out.status = converged ? SolveStatus::converged : SolveStatus::max_iters;
      out.iterations = k;
      out.final_rho_norm = rho_norm;
      emit({k, kNaN, phi, rho_norm, kNaN, kNaN, clock.ms()});
      break;
    }

    const double eta = stepsize_for(L, c, k, config.eta_schedule);
    const Vec e = errors.next(x, grad, eta, k);
    Vec x_next = g.prox(x - eta * (grad - e), eta);
    const double phi_next = problem.phi(x_next);
    const IterationRecord rec{k, eta, phi, rho_norm, e.norm(), (x_next - x).norm(), clock.ms()};

    if (config.audit_inequalities) {
      IterationRecord next_rec;
      next_rec.phi = phi_next;
      AuditResult audit = audit_iteration(rec, next_rec, L, c, config.error_model.bound);
      out.audits.push_back(audit);
      if (!audit.passed) {
        out.violation = std::move(audit);
        out.status = SolveStatus::audit_violation;
        out.iterations = k + 1;
        out.final_rho_norm = rho_norm;
        emit(rec);
        out.x = std::move(x_next);
        return out;
      }
    }

    if (config.trace_every > 0 && k % config.trace_every == 0) emit(rec);
    x = std::move(x_next);
    phi = phi_next;
  }
  out.x = std::move(x);
  return out;
}

}  // namespace nips
