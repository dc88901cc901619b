#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <variant>

#include "nips/linalg.hpp"

namespace nips {

/// Solves the scalar problem argmin_x eta*psi_i(x) + (x - v)^2 / 2 for
/// coordinate i. When used with a box, the map must include the clamp.
using ElementwiseProx = std::function<double(double v, double eta, std::size_t i)>;
using Projection = std::function<Vec(const Vec&)>;
using ProxMap = std::function<Vec(const Vec& y, double eta)>;
using ValueFn = std::function<double(const Vec&)>;
using SubgradientFn = std::function<Vec(const Vec&)>;

// ---------------------------------------------------------------------------
// Closed-form operators

/// Soft threshold: sign(y_i) * max(|y_i| - tau, 0). Exactly |y_i| == tau maps to 0.
Vec prox_l1(const Vec& y, double tau);

Vec project_nonneg(const Vec& y);

/// Prox of tau*||.||_1 + indicator of the nonnegative orthant, computed as
/// soft threshold of the clamped input. The composition is exact for this pair.
Vec prox_l1_nonneg(const Vec& y, double tau);

Vec project_box(const Vec& y, const Vec& lower, const Vec& upper);

// ---------------------------------------------------------------------------
// Box plus hyperplane {l <= x <= u, a'x = b}

struct HyperplaneOptions {
  /// Feasibility tolerance on |a'x - b|, relative to ||a|| * ||u - l||.
  double rel_tol = 1e-10;
  std::size_t max_iter = 500;
};

/// Euclidean projection onto {l <= x <= u, a'x = b}. Bisection on the
/// multiplier nu of x_i = clamp(y_i - nu*a_i, l_i, u_i).
/// Throws EmptySetError when the set is empty.
Vec project_box_hyperplane(const Vec& y, const Vec& lower, const Vec& upper,
                           const Vec& normal, double offset,
                           const HyperplaneOptions& opts = {});

/// Prox of a separable penalty restricted to {l <= x <= u, a'x = b}. Each
/// coordinate is solved by `eprox` at the shifted input y_i - nu*a_i.
/// Throws NumericalError (carrying |a'x - b|) if bisection stalls.
Vec prox_separable_box_hyperplane(const Vec& y, double eta,
                                  const ElementwiseProx& eprox,
                                  const Vec& lower, const Vec& upper,
                                  const Vec& normal, double offset,
                                  const HyperplaneOptions& opts = {});

// ---------------------------------------------------------------------------
// Dykstra splitting

struct DykstraResult {
  Vec x;
  bool converged = false;
  std::size_t iterations = 0;
  double last_change = 0.0;
};

/// Prox of psi + indicator(C) from prox_psi (unit step) and the projection
/// onto C. Stops once an x update moves by at most `tol`. On failure the
/// last iterate is returned with converged == false.
DykstraResult dykstra_prox(const Vec& y, const std::function<Vec(const Vec&)>& prox_psi,
                           const Projection& project, std::size_t max_iter = 1000,
                           double tol = 1e-9);

// ---------------------------------------------------------------------------
// Regularizer

namespace reg {

struct Zero {};
struct L1 {
  double weight;
};
struct Nonneg {};
struct Box {
  Vec lower, upper;
};
struct BoxHyperplane {
  Vec lower, upper, normal;
  double offset;
};
struct L1Nonneg {
  double weight;
};
/// Separable penalty plus a convex set, evaluated through Dykstra.
struct SeparablePlusSet {
  ElementwiseProx prox;
  Projection project;
  ValueFn value;
  std::size_t max_iter = 1000;
  double tol = 1e-9;
};
struct Custom {
  ProxMap prox;
  ValueFn value;
};

}  // namespace reg

using RegularizerKind = std::variant<reg::Zero, reg::L1, reg::Nonneg, reg::Box,
                                     reg::BoxHyperplane, reg::L1Nonneg,
                                     reg::SeparablePlusSet, reg::Custom>;

/// A convex lsc regularizer g, accessed through its value (possibly +inf),
/// its proximity map, and optionally a subgradient of its finite part.
class ProxRegularizer {
 public:
  ProxRegularizer() : kind_(reg::Zero{}) {}
  explicit ProxRegularizer(RegularizerKind kind);

  static ProxRegularizer zero() { return ProxRegularizer(reg::Zero{}); }
  static ProxRegularizer l1(double weight);
  static ProxRegularizer nonneg() { return ProxRegularizer(reg::Nonneg{}); }
  static ProxRegularizer box(Vec lower, Vec upper);
  static ProxRegularizer box_hyperplane(Vec lower, Vec upper, Vec normal, double offset);
  static ProxRegularizer l1_nonneg(double weight);
  static ProxRegularizer separable_plus_set(ElementwiseProx prox, Projection project,
                                            ValueFn value);
  static ProxRegularizer custom(ProxMap prox, ValueFn value);

  /// Builds a regularizer from its textual name. Throws ConfigError for
  /// names that need vector data or are unknown.
  static ProxRegularizer from_name(std::string_view name, double weight = 0.0);

  const RegularizerKind& kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  /// g(x); +inf outside the feasible set.
  double value(const Vec& x) const;
  Vec prox(const Vec& y, double eta) const;

  bool has_subgradient() const noexcept;
  /// An element of the subdifferential at a feasible x.
  Vec subgradient(const Vec& x) const;
  ProxRegularizer& with_subgradient(SubgradientFn fn) {
    subgradient_ = std::move(fn);
    return *this;
  }

 private:
  RegularizerKind kind_;
  SubgradientFn subgradient_;
};

/// Dispatches to the operator matching g's kind.
Vec prox_apply(const ProxRegularizer& g, const Vec& y, double eta);

}  // namespace nips
