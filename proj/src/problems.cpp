#include "nips/problems.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Eigenvalues>

#include "nips/errors.hpp"

namespace nips {

namespace {

double spectral_radius_sym(const Mat& S) {
  if (S.size() == 0) return 0.0;
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues();
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

}  // namespace

SmoothOracle quadratic_oracle(const Mat& Q, const Vec& b) {
  if (Q.rows() != Q.cols() || Q.rows() != b.size())
    throw DimensionMismatch("quadratic_oracle: Q must be square and match b");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw InvalidInput("quadratic_oracle: Q is not symmetric");
  auto q = std::make_shared<const Mat>(Q);
  auto lin = std::make_shared<const Vec>(b);
  SmoothOracle f;
  f.dim = static_cast<std::size_t>(b.size());
  f.value = [q, lin](const Vec& x) { return 0.5 * x.dot(*q * x) - lin->dot(x); };
  f.gradient = [q, lin](const Vec& x) { return Vec(*q * x - *lin); };
  f.lipschitz = std::max(spectral_radius_sym(Q), 1e-12);
  return f;
}

SmoothOracle quartic_1d_oracle(double radius, std::uint64_t seed) {
  SmoothOracle f;
  f.dim = 1;
  f.value = [](const Vec& x) {
    const double v = x[0];
    return 0.25 * v * v * v * v - 0.5 * v * v;
  };
  f.gradient = [](const Vec& x) {
    const double v = x[0];
    return Vec::Constant(1, v * v * v - v);
  };
  f.lipschitz = estimate_lipschitz(f, Vec::Zero(1), radius, 64, seed);
  return f;
}

SmoothOracle least_squares_oracle(const DataMatrix& D, const Vec& y) {
  if (static_cast<Eigen::Index>(rows(D)) != y.size())
    throw DimensionMismatch("least_squares_oracle: D rows differ from y");
  auto d = std::make_shared<const DataMatrix>(D);
  auto target = std::make_shared<const Vec>(y);
  SmoothOracle f;
  f.dim = cols(D);
  f.value = [d, target](const Vec& x) {
    return std::visit([&](const auto& m) { return 0.5 * (m * x - *target).squaredNorm(); }, *d);
  };
  f.gradient = [d, target](const Vec& x) {
    return std::visit([&](const auto& m) { return Vec(m.transpose() * (m * x - *target)); }, *d);
  };
  const Mat dense = to_dense(D);
  f.lipschitz = std::max(spectral_radius_sym(dense.transpose() * dense), 1e-12);
  return f;
}

std::vector<SmoothOracle> least_squares_rows(const DataMatrix& D, const Vec& y) {
  if (static_cast<Eigen::Index>(rows(D)) != y.size())
    throw DimensionMismatch("least_squares_rows: D rows differ from y");
  const Mat dense = to_dense(D);
  std::vector<SmoothOracle> out;
  out.reserve(rows(D));
  for (Eigen::Index t = 0; t < dense.rows(); ++t) {
    auto row = std::make_shared<const Vec>(dense.row(t).transpose());
    const double yt = y[t];
    SmoothOracle f;
    f.dim = static_cast<std::size_t>(dense.cols());
    f.value = [row, yt](const Vec& x) {
      const double r = row->dot(x) - yt;
      return 0.5 * r * r;
    };
    f.gradient = [row, yt](const Vec& x) { return Vec((row->dot(x) - yt) * *row); };
    f.lipschitz = row->squaredNorm();
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<SmoothOracle> shifted_quadratics(const std::vector<Vec>& centers) {
  std::vector<SmoothOracle> out;
  out.reserve(centers.size());
  for (const Vec& c : centers) {
    auto center = std::make_shared<const Vec>(c);
    SmoothOracle f;
    f.dim = static_cast<std::size_t>(c.size());
    f.value = [center](const Vec& x) { return 0.5 * (x - *center).squaredNorm(); };
    f.gradient = [center](const Vec& x) { return Vec(x - *center); };
    f.lipschitz = 1.0;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace nips
