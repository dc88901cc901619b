#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nips/errors.hpp"
#include "nips/io.hpp"
#include "nips/nmf.hpp"
#include "nips/oracle.hpp"
#include "support.hpp"

using namespace nips;
using testing::vec;

namespace {

const Mat I2 = Mat::Identity(2, 2);

double correlation(const Vec& a, const Vec& b) { return a.dot(b) / (a.norm() * b.norm()); }

IncrementalConfig outer(std::size_t iters) {
  IncrementalConfig cfg;
  cfg.solver.max_outer_iters = iters;
  cfg.solver.residual_tol = 1e-9;
  cfg.solver.trace_every = 0;
  cfg.solver.record_time = false;
  return cfg;
}

}  // namespace

TEST_CASE("subproblem_solve") {
  const InnerSettings s;
  const SubproblemResult ls = subproblem_solve(I2, vec({1.0, 1.0}), 0.0, s);
  CHECK(ls.converged);
  CHECK((ls.a - vec({1.0, 1.0})).norm() <= 1e-6);

  const SubproblemResult shrunk = subproblem_solve(I2, vec({1.0, 1.0}), 1.0, s);
  CHECK(shrunk.a.isZero(0.0));
  // Per-coordinate reference on [0, 5].
  const Vec ref = testing::separable_prox([](double v) { return v < 0 ? 1e12 : v; },
                                          vec({1.0, 1.0}), 1.0, 0.0, 5.0);
  CHECK(ref.norm() < 1e-7);

  const SubproblemResult clamp = subproblem_solve(I2, vec({-3.0, 2.0}), 0.0, s);
  CHECK((clamp.a - vec({0.0, 2.0})).norm() <= 1e-6);
  CHECK(clamp.value == doctest::Approx(4.5).epsilon(1e-9));

  const SubproblemResult zero_x = subproblem_solve(Mat::Zero(2, 2), vec({1.0, 1.0}), 0.0, s);
  CHECK(zero_x.a.isZero(0.0));

  InnerSettings tight;
  tight.max_iters = 1;
  tight.tol = 1e-14;
  const Mat X = (Mat(2, 2) << 1.0, 0.9, 0.9, 1.0).finished();
  CHECK_FALSE(subproblem_solve(X, vec({1.0, 2.0}), 0.0, tight).converged);
  tight.abort_on_failure = true;
  CHECK_THROWS_AS(subproblem_solve(X, vec({1.0, 2.0}), 0.0, tight), NumericalError);
}

TEST_CASE("ft_grad") {
  CHECK(ft_grad(I2, vec({1.0, 1.0}), Vec::Zero(2)).isZero(0.0));
  CHECK(ft_grad(I2, vec({2.0, 3.0}), vec({2.0, 3.0})).isZero(0.0));
  CHECK_THROWS_AS(ft_grad(I2, vec({1.0}), vec({1.0, 1.0})), DimensionMismatch);

  // X = I, y = (3, 1), gamma = 1 gives a* = (2, 0); compare with differences of f_t.
  InnerSettings s;
  s.tol = 1e-12;
  s.max_iters = 100000;
  const Vec y = vec({3.0, 1.0});
  const SubproblemResult sol = subproblem_solve(I2, y, 1.0, s);
  CHECK((sol.a - vec({2.0, 0.0})).norm() < 1e-10);
  const Mat analytic = ft_grad(I2, y, sol.a);
  const Vec flat = Eigen::Map<const Vec>(I2.data(), 4);
  const Vec fd = finite_diff_grad(
      [&](const Vec& v) { return ft_value(Eigen::Map<const Mat>(v.data(), 2, 2), y, 1.0, s); },
      flat, 1e-6 * (1.0 + flat.norm()));
  const Vec an = Eigen::Map<const Vec>(analytic.data(), 4);
  CHECK((fd - an).norm() <= 1e-4 * an.norm());
}

TEST_CASE("nmf_objective") {
  NmfProblem p;
  p.Y = Mat(I2);
  p.rank = 2;
  CHECK(nmf_objective(I2, I2, p) == 0.0);
  p.lambda = p.gamma = 1.0;
  CHECK(nmf_objective(I2, I2, p) == 4.0);
  Mat neg = I2;
  neg(0, 1) = -0.1;
  CHECK(nmf_objective(neg, I2, p) == std::numeric_limits<double>::infinity());
  CHECK(nmf_objective(I2, neg, p) == std::numeric_limits<double>::infinity());
}

TEST_CASE("sparsity") {
  CHECK(sparsity(Mat::Zero(3, 4)) == 1.0);
  CHECK(sparsity(Mat::Constant(3, 4, 0.2)) == 0.0);
  Mat half = Mat::Ones(2, 2);
  half(0, 0) = half(1, 1) = 0.0;
  CHECK(sparsity(half) == 0.5);
  CHECK(sparsity(Mat::Constant(2, 2, 1e-3), 1e-2) == 1.0);
}

TEST_CASE("NmfProblem validation") {
  NmfProblem p;
  p.Y = Mat(Mat::Ones(3, 4));
  p.rank = 4;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p.rank = 0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p.rank = 2;
  p.lambda = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p.lambda = 0.0;
  CHECK_NOTHROW(p.validate());
  CHECK(p.effective_minibatch() == 1);
  p.Y = Mat(Mat::Ones(3, 25));
  CHECK(p.effective_minibatch() == 3);
}

TEST_CASE("solve_nmf") {
  SUBCASE("planted rank-3 factorization") {
    const SyntheticData d =
        generate_synthetic(SyntheticKind::planted_nmf, 20, 30, 1, SyntheticParams{0.01, 3});
    NmfProblem p;
    p.Y = d.Y;
    p.rank = 3;
    const NmfResult r = solve_nmf(p, std::uint64_t{4}, outer(500));
    CHECK(r.fit <= 0.05);
    CHECK((r.X.array() >= 0.0).all());
    CHECK((r.A.array() >= 0.0).all());
    CHECK(r.fit == doctest::Approx(relative_fit(p.Y, r.X, r.A)));
  }

  SUBCASE("rank one") {
    std::mt19937_64 rng(6);
    const Vec u = testing::uniform_vec(rng, 12, 0.1, 1.0);
    const Vec v = testing::uniform_vec(rng, 15, 0.1, 1.0);
    NmfProblem p;
    p.Y = Mat(u * v.transpose());
    p.rank = 1;
    const NmfResult r = solve_nmf(p, std::uint64_t{2}, outer(500));
    CHECK(r.fit <= 1e-3);
    CHECK(correlation(r.X.col(0), u) >= 0.999);
  }

  SUBCASE("large penalties empty the factors") {
    const SyntheticData d = generate_synthetic(SyntheticKind::uniform_dense, 6, 8, 3);
    NmfProblem p;
    p.Y = d.Y;
    p.rank = 2;
    p.lambda = 1e3;
    p.gamma = 1e3;
    const NmfResult r = solve_nmf(p, std::uint64_t{1}, outer(50));
    CHECK(r.X.isZero(0.0));
    CHECK(r.objective == doctest::Approx(0.5 * to_dense(d.Y).squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("explicit initial X and sparse input") {
    const SyntheticData d =
        generate_synthetic(SyntheticKind::sparse_uniform, 15, 20, 3, SyntheticParams{0.5, 3});
    NmfProblem p;
    p.Y = d.Y;
    p.rank = 2;
    const Mat X0 = Mat::Constant(15, 2, 0.3);
    const NmfResult a = solve_nmf(p, X0, outer(30));
    const NmfResult b = solve_nmf(p, X0, outer(30));
    CHECK(a.X == b.X);
    CHECK(std::isfinite(a.objective));
    CHECK_THROWS_AS(solve_nmf(p, Mat(Mat::Zero(3, 2)), outer(5)), InvalidInput);
  }

  SUBCASE("all-zero initial X is redrawn once") {
    const SyntheticData d = generate_synthetic(SyntheticKind::uniform_dense, 5, 6, 1);
    NmfProblem p;
    p.Y = d.Y;
    p.rank = 2;
    const NmfResult r = solve_nmf(p, Mat(Mat::Zero(5, 2)), outer(20));
    CHECK(r.reinitialized);
    CHECK_FALSE(r.X.isZero(0.0));
  }
}

TEST_CASE("inner tolerance monotonicity") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat X = (Mat::Random(6, 3).array() + 1.0).matrix();
    const Vec y = testing::uniform_vec(rng, 6, 0.0, 2.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double tol : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
      InnerSettings s;
      s.tol = tol;
      s.max_iters = 1'000'000;
      const double v = ft_value(X, y, 0.2, s);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("sparsity grows with the penalties") {
  const SyntheticData d = generate_synthetic(SyntheticKind::uniform_dense, 20, 30, 5);
  double prev_x = -1.0;
  double prev_a = -1.0;
  for (double pen : {0.0, 0.05, 0.2, 0.8}) {
    NmfProblem p;
    p.Y = d.Y;
    p.rank = 4;
    p.lambda = pen;
    p.gamma = pen;
    const NmfResult r = solve_nmf(p, std::uint64_t{9}, outer(100));
    // Allow one grid step of slack, as the property is qualitative.
    CHECK(r.sparsity_X >= prev_x - 1.0 / static_cast<double>(r.X.size()));
    CHECK(r.sparsity_A >= prev_a - 1.0 / static_cast<double>(r.A.size()));
    prev_x = r.sparsity_X;
    prev_a = r.sparsity_A;
  }
}

TEST_CASE("nmf_decomposable blocks") {
  const SyntheticData d = generate_synthetic(SyntheticKind::uniform_dense, 4, 10, 2);
  NmfProblem p;
  p.Y = d.Y;
  p.rank = 2;
  p.minibatch = 3;
  const Mat X = Mat::Constant(4, 2, 0.5);
  const DecomposableProblem dp = nmf_decomposable(p, X);
  CHECK(dp.size() == 4);
  CHECK(dp.dim() == 8);
  const Vec x = Eigen::Map<const Vec>(X.data(), 8);
  const Mat A = recover_A(X, p);
  CHECK(dp.smooth_value(x) == doctest::Approx(nmf_objective(X, A, p)).epsilon(1e-9));
  // Sum of block gradients is the sum of column gradients.
  Mat G = Mat::Zero(4, 2);
  for (std::size_t t = 0; t < 10; ++t) G += ft_grad(X, column(d.Y, t), A.col(t));
  Vec total = Vec::Zero(8);
  for (const auto& f : dp.components()) total += f.gradient(x);
  CHECK((total - Eigen::Map<const Vec>(G.data(), 8)).norm() <= 1e-9 * (1 + G.norm()));
}
