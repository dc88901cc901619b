#include "nips/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "nips/errors.hpp"

namespace nips {

CompositeProblem::CompositeProblem(SmoothOracle smooth, ProxRegularizer reg)
    : smooth_(std::move(smooth)), reg_(std::move(reg)) {
  if (!smooth_.value || !smooth_.gradient)
    throw ConfigError("smooth oracle needs value and gradient handles");
  if (!(smooth_.lipschitz > 0.0) || !std::isfinite(smooth_.lipschitz))
    throw ConfigError("smooth oracle Lipschitz constant must be positive");
}

double CompositeProblem::phi(const Vec& x) const {
  const double g = reg_.value(x);
  if (std::isinf(g) && g > 0.0) return g;
  return smooth_.value(x) + g;
}

Vec residual_from_gradient(const ProxRegularizer& reg, const Vec& x, const Vec& grad) {
  if (grad.size() != x.size()) throw DimensionMismatch("gradient size differs from x");
  return x - reg.prox(x - grad, 1.0);
}

Vec residual(const CompositeProblem& problem, const Vec& x) {
  return residual_from_gradient(problem.reg(), x, problem.smooth().gradient(x));
}

bool is_eps_stationary(const CompositeProblem& problem, const Vec& x, double eps) {
  if (!(eps >= 0.0)) throw InvalidInput("eps must be >= 0");
  return residual(problem, x).norm() <= eps;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite difference step must be > 0");
  Vec g(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vec finite_diff_grad(const SmoothOracle& oracle, const Vec& x, double h) {
  return finite_diff_grad(oracle.value, x, h);
}

double estimate_lipschitz(const SmoothOracle& oracle, const Vec& center, double radius,
                          std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw InvalidInput("estimate_lipschitz needs at least 2 samples");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidInput("estimate_lipschitz needs a positive region radius");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vec> points;
  std::vector<Vec> grads;
  points.reserve(samples);
  grads.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    Vec p(center.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = center[i] + radius * unit(rng);
    grads.push_back(oracle.gradient(p));
    points.push_back(std::move(p));
  }

  double best = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = i + 1; j < samples; ++j) {
      const double dx = (points[i] - points[j]).norm();
      if (dx <= 0.0) continue;
      best = std::max(best, (grads[i] - grads[j]).norm() / dx);
    }
  }
  return std::max(1.1 * best, 1e-12);
}

}  // namespace nips
