#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>

#include "nips/incremental.hpp"
#include "nips/linalg.hpp"

namespace nips {

/// Settings of the column subproblem solver.
struct InnerSettings {
  /// Bound on the unit-step proximal residual of the subproblem.
  double tol = 1e-6;
  std::size_t max_iters = 10000;
  /// Throw NumericalError instead of accepting an unconverged column.
  bool abort_on_failure = false;
};

/// min_{X, A >= 0} 1/2 ||Y - XA||_F^2 + lambda ||X||_1 + gamma ||A||_1,
/// solved over X with A eliminated column by column.
struct NmfProblem {
  DataMatrix Y;
  std::size_t rank = 1;
  double lambda = 0.0;
  double gamma = 0.0;
  /// Columns per incremental component; 0 selects ceil(T / 10).
  std::size_t minibatch = 0;
  InnerSettings inner;

  std::size_t m() const { return rows(Y); }
  std::size_t T() const { return cols(Y); }
  std::size_t effective_minibatch() const;
  /// Throws InvalidInput on rank, penalty or data problems.
  void validate() const;
};

struct SubproblemResult {
  Vec a;
  /// 1/2 ||y - Xa||^2 + gamma ||a||_1 at the returned a.
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double residual_norm = 0.0;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double spectral_norm_bound(const Mat& gram, std::size_t max_iter = 1000, double rel_tol = 1e-12);

/// Nonnegative lasso min_{a >= 0} 1/2 ||y - Xa||^2 + gamma ||a||_1 by
/// proximal gradient with exact gradients, started from a = 0.
SubproblemResult subproblem_solve(const Mat& X, const Vec& y, double gamma,
                                  const InnerSettings& settings);

/// (X a - y) a^T.
Mat ft_grad(const Mat& X, const Vec& y, const Vec& a);

/// f_t(X), the optimal value of the column subproblem.
double ft_value(const Mat& X, const Vec& y, double gamma, const InnerSettings& settings);

/// 1/2 ||Y - XA||_F^2 + lambda sum|X| + gamma sum|A|; +inf if X or A has a negative entry.
double nmf_objective(const Mat& X, const Mat& A, const NmfProblem& problem);

/// Fraction of entries with |entry| <= zero_tol.
double sparsity(const Mat& M, double zero_tol = 0.0);

/// ||Y - XA||_F / ||Y||_F.
double relative_fit(const DataMatrix& Y, const Mat& X, const Mat& A);

/// Uniform [0, 1] entries scaled by mean(Y) / K.
Mat nmf_initialize(const NmfProblem& problem, std::uint64_t seed);

/// The eliminated problem over vec(X) (column-major): one component per
/// mini-batch of columns, g = lambda ||X||_1 + indicator(X >= 0). Each
/// component reports as local Lipschitz estimate 1.1 ||A_B A_B^T||_2 at the
/// current X. `X_ref` fixes the static Lipschitz values.
DecomposableProblem nmf_decomposable(const NmfProblem& problem, const Mat& X_ref);

/// Column-wise subproblem solutions at X.
Mat recover_A(const Mat& X, const NmfProblem& problem);

struct NmfResult {
  Mat X;
  Mat A;
  IncrementalResult outer;
  double objective = 0.0;
  double fit = 0.0;
  double sparsity_X = 0.0;
  double sparsity_A = 0.0;
  bool reinitialized = false;
};

using NmfInit = std::variant<Mat, std::uint64_t>;

/// Runs the incremental solver on the eliminated problem, then recovers A.
/// The outer Lipschitz estimate is refreshed every outer iteration.
NmfResult solve_nmf(const NmfProblem& problem, const NmfInit& init,
                    const IncrementalConfig& outer_config);

}  // namespace nips
