#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "nips/linalg.hpp"
#include "nips/prox.hpp"

namespace nips {

/// Smooth part f: value, gradient and a Lipschitz constant of the gradient.
struct SmoothOracle {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  double lipschitz = 1.0;
  std::size_t dim = 0;
  /// Optional curvature of a quadratic majorizer of f at x. Solvers with
  /// adaptive Lipschitz enabled use it instead of `lipschitz`.
  std::function<double(const Vec&)> local_lipschitz;
};

/// Phi(x) = f(x) + g(x). Immutable after construction.
class CompositeProblem {
 public:
  CompositeProblem(SmoothOracle smooth, ProxRegularizer reg);

  const SmoothOracle& smooth() const noexcept { return smooth_; }
  const ProxRegularizer& reg() const noexcept { return reg_; }
  std::size_t dim() const noexcept { return smooth_.dim; }

  /// f(x) + g(x); +inf when x is outside the domain of g.
  double phi(const Vec& x) const;

 private:
  SmoothOracle smooth_;
  ProxRegularizer reg_;
};

/// Proximal residual x - prox_1(x - grad f(x)). Always uses unit stepsize.
Vec residual(const CompositeProblem& problem, const Vec& x);

/// Same as residual() when the gradient at x is already known.
Vec residual_from_gradient(const ProxRegularizer& reg, const Vec& x, const Vec& grad);

bool is_eps_stationary(const CompositeProblem& problem, const Vec& x, double eps);

/// Central differences, one coordinate at a time.
Vec finite_diff_grad(const SmoothOracle& oracle, const Vec& x, double h);
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

/// Largest sampled ratio ||grad f(x) - grad f(y)|| / ||x - y|| over all pairs
/// of `samples` points drawn uniformly from the box center +- radius, times
/// 1.1. Deterministic for a given seed; floored at 1e-12.
double estimate_lipschitz(const SmoothOracle& oracle, const Vec& center, double radius,
                          std::size_t samples, std::uint64_t seed);

}  // namespace nips
