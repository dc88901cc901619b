#include <doctest.h>

#include <cmath>
#include <random>

#include "nips/errors.hpp"
#include "nips/oracle.hpp"
#include "support.hpp"

using namespace nips;
using testing::vec;

TEST_CASE("GridSpec") {
  const GridSpec g = GridSpec::cube(2, -1.0, 1.0, 11);
  CHECK(g.dim() == 2);
  CHECK(g.total() == 121.0);
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS(GridSpec::cube(4, -1, 1, 5).validate(), InvalidInput);
  CHECK_THROWS_AS(GridSpec::cube(1, 1, 1, 5).validate(), InvalidInput);
  CHECK_THROWS_AS(GridSpec::cube(1, -1, 1, 2).validate(), InvalidInput);
  CHECK_THROWS_AS(GridSpec::cube(3, -1, 1, 300).validate(), InvalidInput);
}

TEST_CASE("prox_oracle") {
  const ProxOracleResult l1 =
      prox_oracle(ProxRegularizer::l1(1.0), vec({3.0}), 1.0, GridSpec::cube(1, -5, 5, 10001));
  CHECK(std::abs(l1.x[0] - 2.0) <= 1e-3);

  const Vec y = vec({0.3, -1.2});
  const ProxOracleResult id =
      prox_oracle(ProxRegularizer::zero(), y, 0.5, GridSpec::cube(2, -3, 3, 301));
  CHECK((id.x - y).norm() <= 2 * id.pitch);

  const ProxOracleResult nn =
      prox_oracle(ProxRegularizer::nonneg(), vec({-2.0}), 1.0, GridSpec::cube(1, -5, 5, 1001));
  CHECK(std::abs(nn.x[0]) <= 2 * nn.pitch);

  SUBCASE("refinement never increases the objective") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
      const Vec z = testing::uniform_vec(rng, 3, -2, 2);
      const ProxOracleResult r =
          prox_oracle(ProxRegularizer::l1_nonneg(0.5), z, 0.8, GridSpec::cube(3, -3, 3, 31));
      REQUIRE(r.history.size() >= 2);
      for (std::size_t k = 0; k + 1 < r.history.size(); ++k)
        CHECK(r.history[k + 1] <= r.history[k]);
    }
  }

  SUBCASE("hyperplane search stays on the plane") {
    const auto g = ProxRegularizer::box_hyperplane(Vec::Zero(2), Vec::Ones(2), Vec::Ones(2), 1.0);
    const ProxOracleResult r = prox_oracle(g, vec({0.9, 0.3}), 1.0, GridSpec::cube(2, -1, 2, 301));
    CHECK(std::abs(r.x.sum() - 1.0) <= 1e-12);
    CHECK((r.x - vec({0.8, 0.2})).norm() <= 2 * r.pitch);
  }

  CHECK_THROWS_AS(prox_oracle(ProxRegularizer::box(Vec::Constant(1, 10.0), Vec::Constant(1, 11.0)),
                              vec({0.0}), 1.0, GridSpec::cube(1, -1, 1, 11)),
                  OracleError);
  CHECK_THROWS_AS(prox_oracle(ProxRegularizer::zero(), vec({0.0, 1.0}), 1.0,
                              GridSpec::cube(1, -1, 1, 11)),
                  DimensionMismatch);
}

TEST_CASE("check_prox_monotonicity") {
  const MonotonicityReport l1 =
      check_prox_monotonicity(ProxRegularizer::l1(1.0), vec({1.0}), vec({0.0}), {0.5, 1.0, 2.0});
  CHECK(l1.q == std::vector<double>{0.5, 1.0, 1.0});
  CHECK(l1.p == std::vector<double>{1.0, 1.0, 0.5});
  CHECK(l1.passed(0.0));
  // Same values from the grid oracle.
  for (std::size_t i = 0; i < 3; ++i) {
    const ProxOracleResult o = prox_oracle(ProxRegularizer::l1(1.0), vec({1.0}), l1.etas[i],
                                           GridSpec::cube(1, -3, 3, 6001));
    CHECK(std::abs(std::abs(o.x[0] - 1.0) - l1.q[i]) <= 2 * o.pitch);
  }

  const Vec z = vec({3.0, 4.0});
  const MonotonicityReport zero =
      check_prox_monotonicity(ProxRegularizer::zero(), vec({1.0, 1.0}), z, {0.1, 1.0, 10.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(zero.p[i] == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(zero.q[i] == doctest::Approx(5.0 * zero.etas[i]).epsilon(1e-14));
  }
  CHECK(zero.passed(1e-12));

  const MonotonicityReport fixed =
      check_prox_monotonicity(ProxRegularizer::l1(1.0), Vec::Zero(2), Vec::Zero(2), {0.1, 1.0});
  CHECK(fixed.p == std::vector<double>{0.0, 0.0});
  CHECK(fixed.q == std::vector<double>{0.0, 0.0});

  CHECK_THROWS_AS(check_prox_monotonicity(ProxRegularizer::zero(), vec({1.0}), vec({1.0}),
                                          {1.0, 0.5}),
                  InvalidInput);
}

TEST_CASE("check_nonexpansive") {
  const Vec a = vec({1.0, -2.0});
  CHECK(check_nonexpansive(ProxRegularizer::l1(1.0), {{a, a}}, 1.0).max_excess == 0.0);
  CHECK(check_nonexpansive(ProxRegularizer::l1(1.0), {}, 1.0).passed);

  std::mt19937_64 rng(13);
  std::vector<std::pair<Vec, Vec>> pairs;
  for (int i = 0; i < 1000; ++i)
    pairs.emplace_back(testing::uniform_vec(rng, 3, -3, 3), testing::uniform_vec(rng, 3, -3, 3));
  const NonexpansiveReport zero = check_nonexpansive(ProxRegularizer::zero(), pairs, 0.7);
  CHECK(zero.max_excess == doctest::Approx(0.0).epsilon(1e-15));
  const NonexpansiveReport l1 = check_nonexpansive(ProxRegularizer::l1(1.0), pairs, 1.0);
  CHECK(l1.passed);
  CHECK(l1.max_excess <= 1e-15);

  // A deliberately expansive "prox" is caught.
  const auto bad = ProxRegularizer::custom([](const Vec& y, double) { return Vec(2.0 * y); },
                                           [](const Vec&) { return 0.0; });
  CHECK_FALSE(check_nonexpansive(bad, pairs, 1.0).passed);
}
