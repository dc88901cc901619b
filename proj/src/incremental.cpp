#include "nips/incremental.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "nips/errors.hpp"

namespace nips {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SmoothOracle sum_of(std::shared_ptr<const std::vector<SmoothOracle>> parts) {
  SmoothOracle out;
  out.dim = parts->front().dim;
  out.lipschitz = 0.0;
  bool local = true;
  for (const SmoothOracle& p : *parts) {
    out.lipschitz += p.lipschitz;
    local = local && static_cast<bool>(p.local_lipschitz);
  }
  out.value = [parts](const Vec& x) {
    double v = parts->front().value(x);
    for (std::size_t t = 1; t < parts->size(); ++t) v += (*parts)[t].value(x);
    return v;
  };
  out.gradient = [parts](const Vec& x) {
    Vec g = parts->front().gradient(x);
    for (std::size_t t = 1; t < parts->size(); ++t) g += (*parts)[t].gradient(x);
    return g;
  };
  if (local) {
    out.local_lipschitz = [parts](const Vec& x) {
      double L = 0.0;
      for (const SmoothOracle& p : *parts) L += p.local_lipschitz(x);
      return L;
    };
  }
  return out;
}

MajorStep run_major(const DecomposableProblem& problem, const Vec& x, double eta,
                    MinorOperator op, const std::vector<std::size_t>& order,
                    const std::vector<Vec>& grads_at_x, const std::optional<Vec>& s_x) {
  const auto& comps = problem.components();
  const ProxRegularizer& reg = problem.reg();
  const std::size_t T = comps.size();
  if (order.size() != T) throw InvalidInput("major_step: ordering must list every component");

  MajorStep out;
  out.subgradients_known = op == MinorOperator::identity || s_x.has_value();
  out.betas.reserve(T);
  out.error = Vec::Zero(x.size());

  Vec z = x;
  Vec s = (op == MinorOperator::prox && s_x) ? *s_x : Vec::Zero(x.size());
  Vec gsum;
  for (std::size_t idx = 0; idx < T; ++idx) {
    const std::size_t t = order[idx];
    const Vec& g_x = grads_at_x[t];
    const Vec g_z = idx == 0 ? g_x : comps[t].gradient(z);
    if (idx == 0)
      gsum = g_z;
    else
      gsum += g_z;
    out.error += g_x - g_z;
    out.max_grad_norm = std::max(out.max_grad_norm, g_x.norm());
    if (out.subgradients_known) {
      out.betas.push_back((g_x + s).norm());
      out.max_subgrad_norm = std::max(out.max_subgrad_norm, s.norm());
    }
    if (idx + 1 == T) break;

    const Vec input = z - eta * g_z;
    Vec z_next = op == MinorOperator::prox ? reg.prox(input, eta) : input;
    if (out.subgradients_known) {
      const double excess = (z_next - z).norm() - 2.0 * eta * (g_z + s).norm();
      out.step_bound_excess = std::max(out.step_bound_excess, excess);
    }
    if (op == MinorOperator::prox) s = (input - z_next) / eta;
    z = std::move(z_next);
  }

  const Vec input = x - eta * gsum;
  out.x_next = reg.prox(input, eta);
  out.subgradient_next = (input - out.x_next) / eta;
  return out;
}

std::vector<Vec> gradients_at(const DecomposableProblem& problem, const Vec& x) {
  std::vector<Vec> grads;
  grads.reserve(problem.size());
  for (const SmoothOracle& f : problem.components()) grads.push_back(f.gradient(x));
  return grads;
}

}  // namespace

DecomposableProblem::DecomposableProblem(std::vector<SmoothOracle> components,
                                         ProxRegularizer reg)
    : components_(std::move(components)), reg_(std::move(reg)) {
  if (components_.empty()) throw InvalidInput("decomposable problem needs at least one component");
  dim_ = components_.front().dim;
  for (const SmoothOracle& f : components_) {
    if (!f.value || !f.gradient) throw ConfigError("component oracle is missing handles");
    if (f.dim != dim_) throw DimensionMismatch("components disagree on the dimension");
    if (!(f.lipschitz >= 0.0) || !std::isfinite(f.lipschitz))
      throw ConfigError("component Lipschitz constant must be finite and >= 0");
    lipschitz_ = std::max(lipschitz_, f.lipschitz);
  }
}

double DecomposableProblem::smooth_value(const Vec& x) const {
  double v = components_.front().value(x);
  for (std::size_t t = 1; t < components_.size(); ++t) v += components_[t].value(x);
  return v;
}

double DecomposableProblem::phi(const Vec& x) const {
  const double g = reg_.value(x);
  if (std::isinf(g) && g > 0.0) return g;
  return smooth_value(x) + g;
}

SmoothOracle DecomposableProblem::sum_oracle() const {
  return sum_of(std::make_shared<const std::vector<SmoothOracle>>(components_));
}

DecomposableProblem make_minibatches(const DecomposableProblem& problem, std::size_t block_size) {
  if (block_size == 0) throw ConfigError("minibatch size must be >= 1");
  if (block_size == 1) return problem;
  std::vector<SmoothOracle> blocks;
  const auto& comps = problem.components();
  for (std::size_t start = 0; start < comps.size(); start += block_size) {
    const std::size_t stop = std::min(comps.size(), start + block_size);
    auto parts = std::make_shared<const std::vector<SmoothOracle>>(
        comps.begin() + static_cast<std::ptrdiff_t>(start),
        comps.begin() + static_cast<std::ptrdiff_t>(stop));
    blocks.push_back(parts->size() == 1 ? parts->front() : sum_of(parts));
  }
  return DecomposableProblem(std::move(blocks), problem.reg());
}

const char* to_string(MinorOperator op) noexcept {
  return op == MinorOperator::identity ? "major_only" : "minor_prox";
}

MinorOperator minor_operator_from_string(std::string_view name) {
  if (name == "major_only" || name == "identity") return MinorOperator::identity;
  if (name == "minor_prox" || name == "prox") return MinorOperator::prox;
  throw ConfigError("unknown incremental variant '" + std::string(name) + "'");
}

Vec minor_step(const SmoothOracle& component, const Vec& x, double eta, MinorOperator op,
               const ProxRegularizer& reg) {
  if (!(eta > 0.0)) throw InvalidInput("minor_step: eta must be > 0");
  const Vec input = x - eta * component.gradient(x);
  return op == MinorOperator::prox ? reg.prox(input, eta) : input;
}

MajorStep major_step(const DecomposableProblem& problem, const Vec& x_k, double eta,
                     MinorOperator op, const std::vector<std::size_t>& order,
                     const std::optional<Vec>& subgradient_at_x) {
  if (!(eta > 0.0)) throw InvalidInput("major_step: eta must be > 0");
  return run_major(problem, x_k, eta, op, order, gradients_at(problem, x_k), subgradient_at_x);
}

MajorStep major_step(const DecomposableProblem& problem, const Vec& x_k, double eta,
                     const IncrementalConfig& config) {
  std::vector<std::size_t> order(problem.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::optional<Vec> s;
  if (problem.reg().has_subgradient()) s = problem.reg().subgradient(x_k);
  return major_step(problem, x_k, eta, config.minor, order, s);
}

double incrementality_error_bound(std::size_t T, double eta, double L,
                                  const std::vector<double>& betas) {
  if (T <= 1) return 0.0;
  if (betas.size() + 1 < T) throw InvalidInput("incrementality bound needs T-1 betas");
  const double r = 1.0 + 2.0 * eta * L;
  double acc = 0.0;
  double total = 0.0;
  for (std::size_t t = 2; t <= T; ++t) {
    acc = r * acc + betas[t - 2];
    total += 2.0 * eta * L * acc;
  }
  return total;
}

double error_bound_K1(std::size_t T, double eta, double L, double M, double G) {
  if (T <= 1) return 0.0;
  return std::pow(1.0 + 2.0 * eta * L, static_cast<double>(T - 1)) *
         static_cast<double>(T - 1) * (M + G);
}

IncrementalResult solve_incremental(const DecomposableProblem& problem, const Vec& x0,
                                    const IncrementalConfig& config) {
  const SolverConfig& sc = config.solver;
  if (config.minibatch == 0) throw ConfigError("minibatch size must be >= 1");
  if (!sc.error_model.is_none())
    throw ConfigError("incremental solver measures its own error; injected errors unsupported");
  if (!x0.allFinite()) throw InvalidInput("solve_incremental: x0 is not finite");
  if (static_cast<std::size_t>(x0.size()) != problem.dim())
    throw DimensionMismatch("solve_incremental: x0 has the wrong dimension");

  std::optional<DecomposableProblem> blocked;
  if (config.minibatch > 1) blocked = make_minibatches(problem, config.minibatch);
  const DecomposableProblem& P = blocked ? *blocked : problem;
  const ProxRegularizer& g = P.reg();
  const std::size_t T = P.size();
  if (sc.adaptive_lipschitz) {
    for (const SmoothOracle& f : P.components())
      if (!f.local_lipschitz)
        throw ConfigError("adaptive Lipschitz requested but a component has no local estimate");
  }

  double phi = P.phi(x0);
  if (!std::isfinite(phi)) throw InvalidInput("solve_incremental: Phi(x0) is not finite");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    if (!sc.record_time) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  IncrementalResult out;
  out.x_best = x0;
  out.phi_best = phi;
  auto emit = [&](const IterationRecord& rec) {
    out.trace.push_back(rec);
    if (sc.on_record) sc.on_record(rec);
  };

  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(config.shuffle_seed);
  std::optional<Vec> s_x;
  if (g.has_subgradient()) s_x = g.subgradient(x0);
  double M = 0.0;
  double G = 0.0;

  Vec x = x0;
  for (std::size_t k = 0;; ++k) {
    const std::vector<Vec> grads = gradients_at(P, x);
    Vec full = grads.front();
    for (std::size_t t = 1; t < T; ++t) full += grads[t];
    double L = P.lipschitz();
    if (sc.adaptive_lipschitz) {
      L = 0.0;
      for (const SmoothOracle& f : P.components()) L = std::max(L, f.local_lipschitz(x));
    }
    const double c = effective_c(sc, L);
    const double rho_norm = residual_from_gradient(g, x, full).norm();
    if (phi < out.phi_best) {
      out.phi_best = phi;
      out.x_best = x;
    }

    const bool converged = rho_norm <= sc.residual_tol;
    if (converged || k >= sc.max_outer_iters) {
      out.status = converged ? SolveStatus::converged : SolveStatus::max_iters;
      out.iterations = k;
      out.final_rho_norm = rho_norm;
      emit({k, kNaN, phi, rho_norm, kNaN, kNaN, elapsed_ms()});
      break;
    }

    const double eta = stepsize_for(L, c, k, sc.eta_schedule);
    if (config.ordering == Ordering::shuffled)
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    MajorStep step = run_major(P, x, eta, config.minor, order, grads, s_x);
    const IterationRecord rec{k,        eta, phi, rho_norm, step.error.norm(),
                              (step.x_next - x).norm(), elapsed_ms()};

    if (sc.audit_inequalities && step.subgradients_known) {
      M = std::max(M, step.max_grad_norm);
      G = std::max(G, step.max_subgrad_norm);
      IncrementalAudit a;
      a.k = k;
      a.step_bound_excess = T > 1 ? step.step_bound_excess : 0.0;
      a.error_norm = rec.err_norm;
      a.error_bound = incrementality_error_bound(T, eta, L, step.betas);
      a.K1 = error_bound_K1(T, eta, L, M, G);
      a.M = M;
      a.G = G;
      auto fail = [&a](const char* what) {
        a.passed = false;
        if (!a.failure.empty()) a.failure += "; ";
        a.failure += what;
      };
      if (!(a.step_bound_excess <= 1e-9)) fail("bounded increment");
      if (!(a.error_norm <= a.error_bound + 1e-9 * (1.0 + a.error_bound)))
        fail("incrementality error bound");
      if (!(a.error_bound <= a.K1 + 1e-9 * (1.0 + a.K1))) fail("K1 bound");
      out.audits.push_back(a);
      if (!a.passed) {
        out.violation = a;
        out.status = SolveStatus::audit_violation;
        out.iterations = k + 1;
        out.final_rho_norm = rho_norm;
        emit(rec);
        out.x = std::move(step.x_next);
        return out;
      }
    }

    if (sc.trace_every > 0 && k % sc.trace_every == 0) emit(rec);
    s_x = std::move(step.subgradient_next);
    x = std::move(step.x_next);
    phi = P.phi(x);
  }
  out.x = std::move(x);
  return out;
}

}  // namespace nips
