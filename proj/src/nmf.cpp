#include "nips/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "nips/errors.hpp"

namespace nips {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Map<const Mat> as_matrix(const Vec& x, std::size_t m, std::size_t K) {
  return {x.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(K)};
}

Vec as_vector(const Mat& X) { return Eigen::Map<const Vec>(X.data(), X.size()); }

double data_sq_norm(const DataMatrix& Y) {
  return std::visit([](const auto& a) { return a.squaredNorm(); }, Y);
}

double data_mean_abs(const DataMatrix& Y) {
  const double n = static_cast<double>(rows(Y) * cols(Y));
  if (const auto* d = std::get_if<Mat>(&Y)) return d->cwiseAbs().sum() / n;
  return std::get<SpMat>(Y).cwiseAbs().sum() / n;
}

/// Inner solutions of one mini-batch of columns, memoized on the last X.
class BlockSolver {
 public:
  BlockSolver(std::shared_ptr<const NmfProblem> problem, std::size_t first, std::size_t last)
      : problem_(std::move(problem)), first_(first), last_(last) {
    for (std::size_t t = first_; t < last_; ++t) columns_.push_back(column(problem_->Y, t));
  }

  struct Solution {
    std::vector<SubproblemResult> columns;
  };

  std::shared_ptr<const Solution> solve(const Vec& x) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (cached_ && cached_x_.size() == x.size() && (cached_x_.array() == x.array()).all())
      return cached_;
    const auto X = as_matrix(x, problem_->m(), problem_->rank);
    auto sol = std::make_shared<Solution>();
    sol->columns.reserve(columns_.size());
    for (const Vec& y : columns_)
      sol->columns.push_back(subproblem_solve(X, y, problem_->gamma, problem_->inner));
    cached_x_ = x;
    cached_ = sol;
    return sol;
  }

  double value(const Vec& x) const {
    const auto sol = solve(x);
    double v = 0.0;
    for (const SubproblemResult& r : sol->columns) v += r.value;
    return v;
  }

  Vec gradient(const Vec& x) const {
    const auto sol = solve(x);
    const Mat X = as_matrix(x, problem_->m(), problem_->rank);
    Mat grad = Mat::Zero(X.rows(), X.cols());
    for (std::size_t j = 0; j < columns_.size(); ++j)
      grad += ft_grad(X, columns_[j], sol->columns[j].a);
    return as_vector(grad);
  }

  double local_lipschitz(const Vec& x) const {
    const auto sol = solve(x);
    const auto K = static_cast<Eigen::Index>(problem_->rank);
    Mat gram = Mat::Zero(K, K);
    for (const SubproblemResult& r : sol->columns) gram.noalias() += r.a * r.a.transpose();
    const double top = Eigen::SelfAdjointEigenSolver<Mat>(gram, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
    return std::max(1.1 * top, 1e-12);
  }

 private:
  std::shared_ptr<const NmfProblem> problem_;
  std::size_t first_;
  std::size_t last_;
  std::vector<Vec> columns_;
  mutable std::mutex mutex_;
  mutable Vec cached_x_;
  mutable std::shared_ptr<const Solution> cached_;
};

}  // namespace

std::size_t NmfProblem::effective_minibatch() const {
  if (minibatch > 0) return std::min(minibatch, T());
  return std::max<std::size_t>(1, (T() + 9) / 10);
}

void NmfProblem::validate() const {
  if (m() == 0 || T() == 0) throw InvalidInput("NMF data matrix is empty");
  if (rank < 1 || rank > std::min(m(), T()))
    throw InvalidInput("NMF rank must satisfy 1 <= K <= min(m, T)");
  if (!(lambda >= 0.0) || !(gamma >= 0.0) || !std::isfinite(lambda) || !std::isfinite(gamma))
    throw InvalidInput("NMF penalties must be finite and >= 0");
  if (!std::isfinite(data_sq_norm(Y))) throw InvalidInput("NMF data contains non-finite entries");
  if (!(inner.tol > 0.0)) throw InvalidInput("inner tolerance must be > 0");
}

double spectral_norm_bound(const Mat& gram, std::size_t max_iter, double rel_tol) {
  if (gram.rows() != gram.cols()) throw DimensionMismatch("spectral_norm_bound: not square");
  if (gram.size() == 0) return 0.0;
  Vec v = Vec::Ones(gram.rows()).normalized();
  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vec w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - estimate) <= rel_tol * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

SubproblemResult subproblem_solve(const Mat& X, const Vec& y, double gamma,
                                  const InnerSettings& settings) {
  if (X.rows() != y.size()) throw DimensionMismatch("subproblem_solve: X rows differ from y");
  if (!X.allFinite()) throw InvalidInput("subproblem_solve: X is not finite");

  const Eigen::Index K = X.cols();
  const Mat gram = X.transpose() * X;
  const Vec xty = X.transpose() * y;
  const double L = spectral_norm_bound(gram);

  SubproblemResult out;
  out.a = Vec::Zero(K);
  if (!(L > 0.0)) {
    // X = 0: every a gives the same loss and a = 0 minimizes the penalty.
    out.converged = true;
    out.value = 0.5 * y.squaredNorm();
    return out;
  }

  const double eta = stepsize_for(L, default_c(L), 0);
  Vec& a = out.a;
  Vec grad(K);
  for (std::size_t it = 0;; ++it) {
    grad.noalias() = gram * a;
    grad -= xty;
    out.residual_norm = (a - ((a - grad).array() - gamma).cwiseMax(0.0).matrix()).norm();
    out.iterations = it;
    if (out.residual_norm <= settings.tol) {
      out.converged = true;
      break;
    }
    if (it >= settings.max_iters) break;
    a = ((a - eta * grad).array() - eta * gamma).cwiseMax(0.0).matrix();
  }
  if (!out.converged) {
    if (settings.abort_on_failure)
      throw NumericalError("column subproblem did not converge", out.residual_norm);
    spdlog::debug("column subproblem stopped at residual {:.3e}", out.residual_norm);
  }
  out.value = 0.5 * (y - X * a).squaredNorm() + gamma * a.sum();
  return out;
}

Mat ft_grad(const Mat& X, const Vec& y, const Vec& a) {
  if (X.rows() != y.size() || X.cols() != a.size())
    throw DimensionMismatch("ft_grad: inconsistent X, y, a sizes");
  return (X * a - y) * a.transpose();
}

double ft_value(const Mat& X, const Vec& y, double gamma, const InnerSettings& settings) {
  return subproblem_solve(X, y, gamma, settings).value;
}

double nmf_objective(const Mat& X, const Mat& A, const NmfProblem& problem) {
  if (X.rows() != static_cast<Eigen::Index>(problem.m()) || A.cols() != static_cast<Eigen::Index>(problem.T()) ||
      X.cols() != A.rows())
    throw DimensionMismatch("nmf_objective: factor sizes do not match the data");
  if ((X.array() < 0.0).any() || (A.array() < 0.0).any()) return kInf;
  const Mat fit = to_dense(problem.Y) - X * A;
  return 0.5 * fit.squaredNorm() + problem.lambda * X.sum() + problem.gamma * A.sum();
}

double sparsity(const Mat& M, double zero_tol) {
  if (!(zero_tol >= 0.0)) throw InvalidInput("sparsity: zero_tol must be >= 0");
  if (M.size() == 0) return 1.0;
  const auto zeros = (M.array().abs() <= zero_tol).count();
  return static_cast<double>(zeros) / static_cast<double>(M.size());
}

double relative_fit(const DataMatrix& Y, const Mat& X, const Mat& A) {
  const double denom = std::sqrt(data_sq_norm(Y));
  const double num = (to_dense(Y) - X * A).norm();
  return denom > 0.0 ? num / denom : num;
}

Mat nmf_initialize(const NmfProblem& problem, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = data_mean_abs(problem.Y) / static_cast<double>(problem.rank);
  Mat X(static_cast<Eigen::Index>(problem.m()), static_cast<Eigen::Index>(problem.rank));
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = scale * unit(rng);
  return X;
}

DecomposableProblem nmf_decomposable(const NmfProblem& problem, const Mat& X_ref) {
  problem.validate();
  auto shared = std::make_shared<const NmfProblem>(problem);
  const std::size_t block = problem.effective_minibatch();
  const Vec x_ref = as_vector(X_ref);
  std::vector<SmoothOracle> comps;
  for (std::size_t first = 0; first < problem.T(); first += block) {
    auto solver =
        std::make_shared<const BlockSolver>(shared, first, std::min(problem.T(), first + block));
    SmoothOracle f;
    f.dim = problem.m() * problem.rank;
    f.value = [solver](const Vec& x) { return solver->value(x); };
    f.gradient = [solver](const Vec& x) { return solver->gradient(x); };
    f.local_lipschitz = [solver](const Vec& x) { return solver->local_lipschitz(x); };
    f.lipschitz = solver->local_lipschitz(x_ref);
    comps.push_back(std::move(f));
  }
  return DecomposableProblem(std::move(comps), ProxRegularizer::l1_nonneg(problem.lambda));
}

Mat recover_A(const Mat& X, const NmfProblem& problem) {
  Mat A(X.cols(), static_cast<Eigen::Index>(problem.T()));
  for (std::size_t t = 0; t < problem.T(); ++t)
    A.col(static_cast<Eigen::Index>(t)) =
        subproblem_solve(X, column(problem.Y, t), problem.gamma, problem.inner).a;
  return A;
}

NmfResult solve_nmf(const NmfProblem& problem, const NmfInit& init,
                    const IncrementalConfig& outer_config) {
  problem.validate();
  const auto m = static_cast<Eigen::Index>(problem.m());
  const auto K = static_cast<Eigen::Index>(problem.rank);

  std::uint64_t seed = 0;
  Mat X0;
  if (const auto* given = std::get_if<Mat>(&init)) {
    if (given->rows() != m || given->cols() != K)
      throw DimensionMismatch("solve_nmf: initial X has the wrong shape");
    if ((given->array() < 0.0).any() || !given->allFinite())
      throw InvalidInput("solve_nmf: initial X must be finite and nonnegative");
    X0 = *given;
  } else {
    seed = std::get<std::uint64_t>(init);
    X0 = nmf_initialize(problem, seed);
  }

  NmfResult out;
  auto reinitialize = [&] {
    if (out.reinitialized) throw NumericalError("NMF factor X collapsed to zero twice", 0.0);
    out.reinitialized = true;
    ++seed;
    X0 = nmf_initialize(problem, seed);
    if (X0.isZero(0.0)) throw InvalidInput("NMF initialization is degenerate (zero data scale)");
    spdlog::info("NMF: all-zero X, reinitializing with seed {}", seed);
  };
  if (X0.isZero(0.0)) reinitialize();

  IncrementalConfig cfg = outer_config;
  cfg.minibatch = 1;  // components are already mini-batches of columns
  cfg.solver.adaptive_lipschitz = true;

  const bool unpenalized = problem.lambda == 0.0 && problem.gamma == 0.0;
  const bool data_nonzero = data_sq_norm(problem.Y) > 0.0;
  for (;;) {
    const DecomposableProblem dp = nmf_decomposable(problem, X0);
    out.outer = solve_incremental(dp, as_vector(X0), cfg);
    out.X = as_matrix(out.outer.x, problem.m(), problem.rank);
    // Zero is stationary for every penalty; only reject it when nothing forces it.
    if (out.X.isZero(0.0) && unpenalized && data_nonzero) {
      reinitialize();
      continue;
    }
    break;
  }

  out.A = recover_A(out.X, problem);
  out.objective = nmf_objective(out.X, out.A, problem);
  out.fit = relative_fit(problem.Y, out.X, out.A);
  out.sparsity_X = sparsity(out.X);
  out.sparsity_A = sparsity(out.A);
  return out;
}

}  // namespace nips
