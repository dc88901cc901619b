#pragma once

#include <cstdint>
#include <vector>

#include "nips/incremental.hpp"
#include "nips/linalg.hpp"
#include "nips/model.hpp"

namespace nips {

/// f(x) = 1/2 x'Qx - b'x with L = max |eig(Q)|. Q must be symmetric.
SmoothOracle quadratic_oracle(const Mat& Q, const Vec& b);

/// f(x) = x^4/4 - x^2/2. The gradient is only locally Lipschitz; L is
/// estimated on [-radius, radius].
SmoothOracle quartic_1d_oracle(double radius = 2.0, std::uint64_t seed = 0);

/// f(x) = 1/2 ||Dx - y||^2 with L = ||D'D||_2.
SmoothOracle least_squares_oracle(const DataMatrix& D, const Vec& y);

/// One component 1/2 (d_t'x - y_t)^2 per row of D, L_t = ||d_t||^2.
std::vector<SmoothOracle> least_squares_rows(const DataMatrix& D, const Vec& y);

/// One component 1/2 ||x - center||^2 per center, L_t = 1.
std::vector<SmoothOracle> shifted_quadratics(const std::vector<Vec>& centers);

}  // namespace nips
