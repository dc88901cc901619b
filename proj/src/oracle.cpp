#include "nips/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "nips/errors.hpp"

namespace nips {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kRefineRounds = 3;
// Each round shrinks the pitch by 4 / (points - 1). More points would push the
// pitch below what double precision can resolve in the objective.
constexpr std::size_t kRefinePoints = 41;

// Search space x = origin + basis * w, w on a tensor grid.
struct Chart {
  Vec origin;
  Mat basis;
};

struct Scan {
  Vec lo;
  Vec pitch;
  std::vector<std::size_t> points;
};

struct Best {
  Vec w;
  double objective = kInf;
};

double prox_objective(const ProxRegularizer& g, const Vec& y, double eta, const Vec& x) {
  const double gv = g.value(x);
  if (!std::isfinite(gv)) return kInf;
  return gv + (x - y).squaredNorm() / (2.0 * eta);
}

void scan(const ProxRegularizer& g, const Vec& y, double eta, const Chart& chart, const Scan& s,
          Best& best) {
  const std::size_t d = s.points.size();
  std::vector<std::size_t> idx(d, 0);
  Vec w(static_cast<Eigen::Index>(d));
  Vec x(y.size());
  for (;;) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      w[jj] = s.lo[jj] + static_cast<double>(idx[j]) * s.pitch[jj];
    }
    x.noalias() = chart.origin + chart.basis * w;
    const double obj = prox_objective(g, y, eta, x);
    if (obj < best.objective) {
      best.objective = obj;
      best.w = w;
    }
    std::size_t j = 0;
    while (j < d && ++idx[j] == s.points[j]) idx[j++] = 0;
    if (j == d) break;
  }
}

Chart hyperplane_chart(const reg::BoxHyperplane& h, const GridSpec& grid, Vec& w_lo, Vec& w_hi) {
  const Eigen::Index n = h.normal.size();
  const double a2 = h.normal.squaredNorm();
  const Vec center = 0.5 * (grid.lo + grid.hi);
  Chart chart;
  chart.origin = center - h.normal * ((h.normal.dot(center) - h.offset) / a2);
  const Mat Q = Eigen::HouseholderQR<Mat>(Mat(h.normal)).householderQ();
  chart.basis = Q.rightCols(n - 1);
  const double radius = 0.5 * (grid.hi - grid.lo).norm();
  w_lo = Vec::Constant(n - 1, -radius);
  w_hi = Vec::Constant(n - 1, radius);
  return chart;
}

}  // namespace

GridSpec GridSpec::cube(std::size_t dim, double lo, double hi, std::size_t points) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Vec::Constant(n, lo), Vec::Constant(n, hi), std::vector<std::size_t>(dim, points)};
}

double GridSpec::total() const {
  double t = 1.0;
  for (std::size_t p : points) t *= static_cast<double>(p);
  return t;
}

void GridSpec::validate() const {
  const std::size_t d = dim();
  if (d == 0 || d > 3) throw InvalidInput("oracle grid must have 1 to 3 dimensions");
  if (static_cast<std::size_t>(lo.size()) != d || static_cast<std::size_t>(hi.size()) != d)
    throw DimensionMismatch("oracle grid bounds do not match its dimension");
  for (std::size_t j = 0; j < d; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (!(lo[jj] < hi[jj])) throw InvalidInput("oracle grid needs lo < hi");
    if (points[j] < 3) throw InvalidInput("oracle grid needs at least 3 points per dimension");
  }
  if (total() > 1e7) throw InvalidInput("oracle grid exceeds 1e7 points");
}

ProxOracleResult prox_oracle(const ProxRegularizer& g, const Vec& y, double eta,
                             const GridSpec& grid) {
  grid.validate();
  if (static_cast<std::size_t>(y.size()) != grid.dim())
    throw DimensionMismatch("prox_oracle: y and grid dimensions differ");
  if (!(eta > 0.0)) throw InvalidInput("prox_oracle: eta must be > 0");

  Chart chart;
  Vec w_lo = grid.lo;
  Vec w_hi = grid.hi;
  std::vector<std::size_t> points = grid.points;
  const auto* h = std::get_if<reg::BoxHyperplane>(&g.kind());
  if (h != nullptr && h->normal.squaredNorm() > 0.0) {
    chart = hyperplane_chart(*h, grid, w_lo, w_hi);
    points.resize(static_cast<std::size_t>(w_lo.size()));
  } else {
    chart.origin = Vec::Zero(y.size());
    chart.basis = Mat::Identity(y.size(), y.size());
  }

  ProxOracleResult out;
  Best best;
  if (points.empty()) {
    // One-dimensional hyperplane: a single candidate point.
    best.w = Vec(0);
    best.objective = prox_objective(g, y, eta, chart.origin);
    if (!std::isfinite(best.objective)) throw OracleError("prox_oracle: g is +inf on the grid");
    out.x = chart.origin;
    out.objective = best.objective;
    out.history.assign(kRefineRounds + 1, best.objective);
    return out;
  }

  Scan s{w_lo, Vec(w_lo.size()), points};
  for (Eigen::Index j = 0; j < w_lo.size(); ++j)
    s.pitch[j] = (w_hi[j] - w_lo[j]) / static_cast<double>(points[static_cast<std::size_t>(j)] - 1);
  scan(g, y, eta, chart, s, best);
  if (!std::isfinite(best.objective)) throw OracleError("prox_oracle: g is +inf on the grid");
  out.history.push_back(best.objective);

  for (int round = 0; round < kRefineRounds; ++round) {
    // Odd counts put a node on the previous argmin, so the objective cannot increase.
    for (std::size_t j = 0; j < s.points.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const std::size_t p = std::min<std::size_t>(s.points[j] | 1U, kRefinePoints);
      const double half = 2.0 * s.pitch[jj];
      s.points[j] = p;
      s.lo[jj] = best.w[jj] - half;
      s.pitch[jj] = 2.0 * half / static_cast<double>(p - 1);
    }
    scan(g, y, eta, chart, s, best);
    out.history.push_back(best.objective);
  }

  out.x = chart.origin + chart.basis * best.w;
  out.objective = best.objective;
  out.pitch = s.pitch.maxCoeff();
  return out;
}

MonotonicityReport check_prox_monotonicity(const ProxRegularizer& g, const Vec& y, const Vec& z,
                                           const std::vector<double>& etas) {
  if (y.size() != z.size()) throw DimensionMismatch("check_prox_monotonicity: y and z sizes");
  MonotonicityReport r;
  r.etas = etas;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double eta = etas[i];
    if (!(eta > 0.0) || (i > 0 && !(eta > etas[i - 1])))
      throw InvalidInput("check_prox_monotonicity: etas must be positive and increasing");
    const double q = (g.prox(y - eta * z, eta) - y).norm();
    r.q.push_back(q);
    r.p.push_back(q / eta);
  }
  for (std::size_t i = 0; i + 1 < etas.size(); ++i) {
    r.p_violation = std::max(r.p_violation, r.p[i + 1] - r.p[i]);
    r.q_violation = std::max(r.q_violation, r.q[i] - r.q[i + 1]);
  }
  return r;
}

NonexpansiveReport check_nonexpansive(const ProxRegularizer& g,
                                      const std::vector<std::pair<Vec, Vec>>& pairs, double eta) {
  if (!(eta > 0.0)) throw InvalidInput("check_nonexpansive: eta must be > 0");
  NonexpansiveReport r;
  r.max_excess = pairs.empty() ? 0.0 : -kInf;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [x, y] = pairs[i];
    const double excess = (g.prox(x, eta) - g.prox(y, eta)).norm() - (x - y).norm();
    if (excess > r.max_excess) {
      r.max_excess = excess;
      r.worst = i;
    }
  }
  r.passed = r.max_excess <= 1e-9;
  return r;
}

}  // namespace nips
