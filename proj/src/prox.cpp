#include "nips/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <spdlog/spdlog.h>

#include "nips/errors.hpp"

namespace nips {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const Vec& y, const char* what) {
  if (!y.allFinite()) throw InvalidInput(std::string(what) + ": non-finite input");
}

void require_nonneg(double tau, const char* what) {
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw InvalidInput(std::string(what) + ": threshold must be finite and >= 0");
}

void require_positive_eta(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidInput("prox: eta must be > 0");
}

void require_box(const Vec& y, const Vec& lower, const Vec& upper) {
  if (lower.size() != y.size() || upper.size() != y.size())
    throw DimensionMismatch("box bounds do not match the input dimension");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
      throw InvalidInput("box bounds require l <= u");
  }
}

double soft(double v, double tau) {
  const double m = std::abs(v) - tau;
  return m > 0.0 ? std::copysign(m, v) : 0.0;
}

double hyperplane_tolerance(const Vec& lower, const Vec& upper, const Vec& normal,
                            const Vec& y, double rel_tol) {
  const double width = (upper - lower).norm();
  const double scale = (std::isfinite(width) && width > 0.0) ? width
                                                              : std::max(1.0, y.norm());
  return rel_tol * normal.norm() * scale;
}

}  // namespace

Vec prox_l1(const Vec& y, double tau) {
  require_finite(y, "prox_l1");
  require_nonneg(tau, "prox_l1");
  return y.unaryExpr([tau](double v) { return soft(v, tau); });
}

Vec project_nonneg(const Vec& y) {
  require_finite(y, "project_nonneg");
  return y.cwiseMax(0.0);
}

Vec prox_l1_nonneg(const Vec& y, double tau) {
  require_finite(y, "prox_l1_nonneg");
  require_nonneg(tau, "prox_l1_nonneg");
  return y.unaryExpr([tau](double v) { return std::max(v - tau, 0.0); });
}

Vec project_box(const Vec& y, const Vec& lower, const Vec& upper) {
  require_finite(y, "project_box");
  require_box(y, lower, upper);
  return y.cwiseMax(lower).cwiseMin(upper);
}

Vec prox_separable_box_hyperplane(const Vec& y, double eta, const ElementwiseProx& eprox,
                                  const Vec& lower, const Vec& upper, const Vec& normal,
                                  double offset, const HyperplaneOptions& opts) {
  require_finite(y, "prox_separable_box_hyperplane");
  require_positive_eta(eta);
  require_box(y, lower, upper);
  if (normal.size() != y.size())
    throw DimensionMismatch("hyperplane normal does not match the input dimension");
  if (!normal.allFinite() || !std::isfinite(offset))
    throw InvalidInput("hyperplane data must be finite");
  if (!eprox) throw ConfigError("elementwise prox handle is empty");

  const Eigen::Index n = y.size();
  Vec x(n);
  auto point_at = [&](double nu) {
    for (Eigen::Index i = 0; i < n; ++i)
      x[i] = eprox(y[i] - nu * normal[i], eta, static_cast<std::size_t>(i));
    return normal.dot(x);
  };

  const double tol = hyperplane_tolerance(lower, upper, normal, y, opts.rel_tol);
  if (normal.norm() == 0.0) {
    if (offset != 0.0) throw EmptySetError("hyperplane 0'x = b with b != 0 is empty");
    point_at(0.0);
    return x;
  }

  // a'x(nu) is nonincreasing in nu; its range is [level_min, level_max].
  double level_min = 0.0;
  double level_max = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (normal[i] > 0.0) {
      level_min += normal[i] * lower[i];
      level_max += normal[i] * upper[i];
    } else if (normal[i] < 0.0) {
      level_min += normal[i] * upper[i];
      level_max += normal[i] * lower[i];
    }
  }
  if (offset < level_min - tol || offset > level_max + tol)
    throw EmptySetError("box-hyperplane set is empty: b outside [" +
                        std::to_string(level_min) + ", " + std::to_string(level_max) + "]");

  double level = point_at(0.0);
  if (std::abs(level - offset) <= tol) return x;

  // Bracket the multiplier by doubling away from zero.
  const double dir = level > offset ? 1.0 : -1.0;
  double inner = 0.0;
  double outer = 1.0 / std::max(normal.squaredNorm(), 1e-300);
  for (int k = 0;; ++k) {
    level = point_at(dir * outer);
    if (std::abs(level - offset) <= tol) return x;
    if ((dir > 0.0 && level < offset) || (dir < 0.0 && level > offset)) break;
    if (k > 2000 || !std::isfinite(outer))
      throw NumericalError("could not bracket the hyperplane multiplier",
                           std::abs(level - offset));
    inner = outer;
    outer *= 2.0;
  }

  double lo = std::min(dir * inner, dir * outer);
  double hi = std::max(dir * inner, dir * outer);
  double best_residual = kInf;
  Vec best = x;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    level = point_at(mid);
    const double r = std::abs(level - offset);
    if (r < best_residual) {
      best_residual = r;
      best = x;
    }
    if (r <= tol) return x;
    if (level > offset)
      lo = mid;
    else
      hi = mid;
  }
  if (best_residual <= tol) return best;
  throw NumericalError("hyperplane bisection did not reach tolerance", best_residual);
}

Vec project_box_hyperplane(const Vec& y, const Vec& lower, const Vec& upper,
                           const Vec& normal, double offset, const HyperplaneOptions& opts) {
  require_box(y, lower, upper);
  auto clamp = [&](double v, double, std::size_t i) {
    return std::clamp(v, lower[static_cast<Eigen::Index>(i)],
                      upper[static_cast<Eigen::Index>(i)]);
  };
  return prox_separable_box_hyperplane(y, 1.0, clamp, lower, upper, normal, offset, opts);
}

DykstraResult dykstra_prox(const Vec& y, const std::function<Vec(const Vec&)>& prox_psi,
                           const Projection& project, std::size_t max_iter, double tol) {
  require_finite(y, "dykstra_prox");
  if (!prox_psi || !project) throw ConfigError("dykstra_prox: empty operator handle");
  if (!(tol > 0.0)) throw InvalidInput("dykstra_prox: tol must be > 0");

  DykstraResult out;
  Vec x = y;
  Vec p = Vec::Zero(y.size());
  Vec q = Vec::Zero(y.size());
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Vec e = prox_psi(x + p);
    p = x + p - e;
    Vec x_next = project(e + q);
    q = e + q - x_next;
    out.last_change = (x_next - x).norm();
    x = std::move(x_next);
    out.iterations = it;
    if (out.last_change <= tol) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------

ProxRegularizer::ProxRegularizer(RegularizerKind kind) : kind_(std::move(kind)) {
  if (const auto* c = std::get_if<reg::Custom>(&kind_); c && !c->prox)
    throw ConfigError("custom regularizer needs a prox handle");
  if (const auto* s = std::get_if<reg::SeparablePlusSet>(&kind_);
      s && (!s->prox || !s->project))
    throw ConfigError("separable_plus_set regularizer needs prox and projection handles");
}

ProxRegularizer ProxRegularizer::l1(double weight) {
  require_nonneg(weight, "l1 weight");
  return ProxRegularizer(reg::L1{weight});
}

ProxRegularizer ProxRegularizer::l1_nonneg(double weight) {
  require_nonneg(weight, "l1_plus_nonneg weight");
  return ProxRegularizer(reg::L1Nonneg{weight});
}

ProxRegularizer ProxRegularizer::box(Vec lower, Vec upper) {
  require_box(lower, lower, upper);
  return ProxRegularizer(reg::Box{std::move(lower), std::move(upper)});
}

ProxRegularizer ProxRegularizer::box_hyperplane(Vec lower, Vec upper, Vec normal,
                                                double offset) {
  require_box(lower, lower, upper);
  if (normal.size() != lower.size()) throw DimensionMismatch("hyperplane normal size");
  return ProxRegularizer(
      reg::BoxHyperplane{std::move(lower), std::move(upper), std::move(normal), offset});
}

ProxRegularizer ProxRegularizer::separable_plus_set(ElementwiseProx prox, Projection project,
                                                    ValueFn value) {
  reg::SeparablePlusSet s;
  s.prox = std::move(prox);
  s.project = std::move(project);
  s.value = std::move(value);
  return ProxRegularizer(std::move(s));
}

ProxRegularizer ProxRegularizer::custom(ProxMap prox, ValueFn value) {
  return ProxRegularizer(reg::Custom{std::move(prox), std::move(value)});
}

ProxRegularizer ProxRegularizer::from_name(std::string_view name, double weight) {
  if (name == "zero") return zero();
  if (name == "l1") return l1(weight);
  if (name == "nonneg" || name == "indicator_nonneg") return nonneg();
  if (name == "l1_nonneg" || name == "l1_plus_nonneg") return l1_nonneg(weight);
  throw ConfigError("unknown or non-scalar regularizer kind '" + std::string(name) + "'");
}

std::string_view ProxRegularizer::name() const noexcept {
  struct Namer {
    std::string_view operator()(const reg::Zero&) const { return "zero"; }
    std::string_view operator()(const reg::L1&) const { return "l1"; }
    std::string_view operator()(const reg::Nonneg&) const { return "indicator_nonneg"; }
    std::string_view operator()(const reg::Box&) const { return "indicator_box"; }
    std::string_view operator()(const reg::BoxHyperplane&) const {
      return "indicator_box_hyperplane";
    }
    std::string_view operator()(const reg::L1Nonneg&) const { return "l1_plus_nonneg"; }
    std::string_view operator()(const reg::SeparablePlusSet&) const {
      return "separable_plus_set";
    }
    std::string_view operator()(const reg::Custom&) const { return "custom"; }
  };
  return std::visit(Namer{}, kind_);
}

namespace {

bool in_box(const Vec& x, const Vec& lower, const Vec& upper) {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

}  // namespace

double ProxRegularizer::value(const Vec& x) const {
  struct Eval {
    const Vec& x;
    double operator()(const reg::Zero&) const { return 0.0; }
    double operator()(const reg::L1& r) const { return r.weight * x.lpNorm<1>(); }
    double operator()(const reg::Nonneg&) const {
      return (x.array() >= 0.0).all() ? 0.0 : kInf;
    }
    double operator()(const reg::Box& r) const {
      return in_box(x, r.lower, r.upper) ? 0.0 : kInf;
    }
    double operator()(const reg::BoxHyperplane& r) const {
      if (!in_box(x, r.lower, r.upper)) return kInf;
      const double tol =
          std::max(100.0 * hyperplane_tolerance(r.lower, r.upper, r.normal, x, 1e-10),
                   1e-12 * (1.0 + std::abs(r.offset)));
      return std::abs(r.normal.dot(x) - r.offset) <= tol ? 0.0 : kInf;
    }
    double operator()(const reg::L1Nonneg& r) const {
      return (x.array() >= 0.0).all() ? r.weight * x.sum() : kInf;
    }
    double operator()(const reg::SeparablePlusSet& r) const {
      if (!r.value) throw ConfigError("separable_plus_set regularizer has no value handle");
      return r.value(x);
    }
    double operator()(const reg::Custom& r) const {
      if (!r.value) throw ConfigError("custom regularizer has no value handle");
      return r.value(x);
    }
  };
  return std::visit(Eval{x}, kind_);
}

Vec ProxRegularizer::prox(const Vec& y, double eta) const {
  require_positive_eta(eta);
  struct Apply {
    const Vec& y;
    double eta;
    Vec operator()(const reg::Zero&) const {
      require_finite(y, "prox");
      return y;
    }
    Vec operator()(const reg::L1& r) const { return prox_l1(y, eta * r.weight); }
    Vec operator()(const reg::Nonneg&) const { return project_nonneg(y); }
    Vec operator()(const reg::Box& r) const { return project_box(y, r.lower, r.upper); }
    Vec operator()(const reg::BoxHyperplane& r) const {
      return project_box_hyperplane(y, r.lower, r.upper, r.normal, r.offset);
    }
    Vec operator()(const reg::L1Nonneg& r) const { return prox_l1_nonneg(y, eta * r.weight); }
    Vec operator()(const reg::SeparablePlusSet& r) const {
      const double step = eta;
      auto prox_psi = [&r, step](const Vec& v) {
        Vec out(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
          out[i] = r.prox(v[i], step, static_cast<std::size_t>(i));
        return out;
      };
      DykstraResult res = dykstra_prox(y, prox_psi, r.project, r.max_iter, r.tol);
      if (!res.converged)
        spdlog::debug("dykstra stopped after {} sweeps, last change {:.3e}", res.iterations,
                      res.last_change);
      return std::move(res.x);
    }
    Vec operator()(const reg::Custom& r) const {
      require_finite(y, "prox");
      return r.prox(y, eta);
    }
  };
  return std::visit(Apply{y, eta}, kind_);
}

bool ProxRegularizer::has_subgradient() const noexcept {
  if (subgradient_) return true;
  return !std::holds_alternative<reg::SeparablePlusSet>(kind_) &&
         !std::holds_alternative<reg::Custom>(kind_);
}

Vec ProxRegularizer::subgradient(const Vec& x) const {
  if (subgradient_) return subgradient_(x);
  if (const auto* r = std::get_if<reg::L1>(&kind_))
    return r->weight * x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  if (const auto* r = std::get_if<reg::L1Nonneg>(&kind_))
    return r->weight * x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  if (!has_subgradient())
    throw ConfigError("regularizer '" + std::string(name()) + "' has no subgradient handle");
  // Indicators and the zero function: 0 lies in the subdifferential on the domain.
  return Vec::Zero(x.size());
}

Vec prox_apply(const ProxRegularizer& g, const Vec& y, double eta) { return g.prox(y, eta); }

}  // namespace nips
