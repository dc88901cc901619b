#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nips/batch.hpp"
#include "nips/model.hpp"

namespace nips {

/// Phi(x) = sum_t f_t(x) + g(x) with L = max_t L_t.
class DecomposableProblem {
 public:
  DecomposableProblem(std::vector<SmoothOracle> components, ProxRegularizer reg);

  const std::vector<SmoothOracle>& components() const noexcept { return components_; }
  const ProxRegularizer& reg() const noexcept { return reg_; }
  std::size_t size() const noexcept { return components_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  double lipschitz() const noexcept { return lipschitz_; }

  /// f_1 + ... + f_T evaluated left to right.
  double smooth_value(const Vec& x) const;
  double phi(const Vec& x) const;

  /// The sum as a single oracle, with Lipschitz constant sum_t L_t.
  SmoothOracle sum_oracle() const;
  CompositeProblem as_composite() const { return {sum_oracle(), reg_}; }

 private:
  std::vector<SmoothOracle> components_;
  ProxRegularizer reg_;
  std::size_t dim_ = 0;
  double lipschitz_ = 0.0;
};

/// Contiguous blocks of `block_size` components, each block acting as one f_t.
DecomposableProblem make_minibatches(const DecomposableProblem& problem, std::size_t block_size);

/// Operator applied after each minor step. The major step always uses the prox.
enum class MinorOperator {
  identity,  // prox once per major iteration
  prox,      // prox after every minor iteration
};

enum class Ordering { cyclic, shuffled };

const char* to_string(MinorOperator op) noexcept;
MinorOperator minor_operator_from_string(std::string_view name);

struct IncrementalConfig {
  SolverConfig solver;
  MinorOperator minor = MinorOperator::prox;
  Ordering ordering = Ordering::cyclic;
  /// Seed for the per-iteration reshuffle when ordering is shuffled.
  std::uint64_t shuffle_seed = 0;
  std::size_t minibatch = 1;
};

/// O(x - eta grad f_t(x)).
Vec minor_step(const SmoothOracle& component, const Vec& x, double eta, MinorOperator op,
               const ProxRegularizer& reg);

struct MajorStep {
  Vec x_next;
  /// e(x^k) = sum_t [grad f_t(x^k) - grad f_t(x^{k,t})].
  Vec error;
  /// ||grad f_j(x^k) + s^j|| in processing order, s^j the subgradient at x^{k,j}.
  std::vector<double> betas;
  /// max over minor steps of ||dx|| - 2 eta ||grad f_t + s^t||.
  double step_bound_excess = -std::numeric_limits<double>::infinity();
  bool subgradients_known = false;
  double max_grad_norm = 0.0;
  double max_subgrad_norm = 0.0;
  /// Subgradient of g at x_next recovered from the major prox.
  Vec subgradient_next;
};

/// One major iteration over `order`. `subgradient_at_x` is an element of
/// dg(x_k) when known (needed for the minor-prox audits).
MajorStep major_step(const DecomposableProblem& problem, const Vec& x_k, double eta,
                     MinorOperator op, const std::vector<std::size_t>& order,
                     const std::optional<Vec>& subgradient_at_x = std::nullopt);
MajorStep major_step(const DecomposableProblem& problem, const Vec& x_k, double eta,
                     const IncrementalConfig& config);

/// Sum over t = 2..T of 2 eta L sum_{j<t} (1 + 2 eta L)^{t-1-j} beta_j.
double incrementality_error_bound(std::size_t T, double eta, double L,
                                  const std::vector<double>& betas);

/// (1 + 2 eta L)^{T-1} (T - 1) (M + G).
double error_bound_K1(std::size_t T, double eta, double L, double M, double G);

struct IncrementalAudit {
  std::size_t k = 0;
  bool passed = true;
  double step_bound_excess = 0.0;
  double error_norm = 0.0;
  double error_bound = 0.0;
  double K1 = 0.0;
  double M = 0.0;
  double G = 0.0;
  std::string failure;
};

struct IncrementalResult {
  Vec x;
  Vec x_best;
  double phi_best = 0.0;
  double final_rho_norm = 0.0;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::max_iters;
  IterationTrace trace;
  std::vector<IncrementalAudit> audits;
  std::optional<IncrementalAudit> violation;
};

/// Outer loop of major steps, stopping on the residual of the full problem.
IncrementalResult solve_incremental(const DecomposableProblem& problem, const Vec& x0,
                                    const IncrementalConfig& config);

}  // namespace nips
