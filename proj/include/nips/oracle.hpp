#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "nips/linalg.hpp"
#include "nips/prox.hpp"

namespace nips {

/// Tensor grid over at most 3 dimensions.
struct GridSpec {
  Vec lo;
  Vec hi;
  std::vector<std::size_t> points;

  static GridSpec cube(std::size_t dim, double lo, double hi, std::size_t points);

  std::size_t dim() const noexcept { return points.size(); }
  double total() const;
  /// Throws InvalidInput on violated invariants.
  void validate() const;
};

struct ProxOracleResult {
  Vec x;
  /// g(x) + ||x - y||^2 / (2 eta) at x.
  double objective = 0.0;
  /// Largest pitch of the last refinement grid.
  double pitch = 0.0;
  /// Objective after the initial grid and after each refinement round.
  std::vector<double> history;
};

/// Brute-force minimizer of g(x) + ||x - y||^2 / (2 eta): grid argmin then
/// 3 rounds of re-centered refinement (+-2 pitches, at most 41 points per axis). For a box-hyperplane g the search runs
/// over the hyperplane, in coordinates of an orthonormal basis of its
/// direction space, with radius covering the given grid and the first n - 1
/// point counts.
/// Throws OracleError when g is +inf on the whole grid.
ProxOracleResult prox_oracle(const ProxRegularizer& g, const Vec& y, double eta,
                             const GridSpec& grid);

struct MonotonicityReport {
  std::vector<double> etas;
  std::vector<double> p;
  std::vector<double> q;
  /// max_i p(eta_{i+1}) - p(eta_i), clipped below at 0.
  double p_violation = 0.0;
  /// max_i q(eta_i) - q(eta_{i+1}), clipped below at 0.
  double q_violation = 0.0;

  bool passed(double slack) const { return p_violation <= slack && q_violation <= slack; }
};

/// p(eta) = ||prox_eta(y - eta z) - y|| / eta and q(eta) = eta p(eta) over `etas`.
MonotonicityReport check_prox_monotonicity(const ProxRegularizer& g, const Vec& y, const Vec& z,
                                           const std::vector<double>& etas);

struct NonexpansiveReport {
  /// max over pairs of ||prox(x) - prox(y)|| - ||x - y||; 0 for no pairs.
  double max_excess = 0.0;
  std::size_t worst = 0;
  bool passed = true;
};

NonexpansiveReport check_nonexpansive(const ProxRegularizer& g,
                                      const std::vector<std::pair<Vec, Vec>>& pairs, double eta);

}  // namespace nips
